#include "capstream/detector.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "capstream/error.hpp"
#include "capstream/log.hpp"

namespace capstream {

std::string_view to_string(MergePolicy policy) {
  return policy == MergePolicy::Union ? "union" : "last-sensor";
}

MergePolicy parse_merge_policy(std::string_view name) {
  if (name == "union") return MergePolicy::Union;
  if (name == "last-sensor") return MergePolicy::LastSensor;
  fail(Errc::Config, "unknown merge policy: " + std::string(name));
}

DetectorConfig DetectorConfig::for_rate(double rate) {
  require(rate > 0, Errc::InvalidParameter, "sampling rate must be positive");
  auto secs = [rate](double s) { return static_cast<std::size_t>(std::llround(s * rate)); };
  DetectorConfig c;
  c.p1 = secs(6);
  c.p_0a = secs(10);
  c.p_0b = secs(8);
  c.p_safe = secs(3);
  return c;
}

void DetectorConfig::validate() const {
  require(phi > 0 && std::isfinite(phi), Errc::InvalidParameter, "phi must be positive");
  require(p1 > 0 && p_s > 0 && p_e > 0 && p_safe > 0 && p_0a > 0 && p_0b > 0 && max_crossing_window > 0,
          Errc::InvalidParameter, "all detector periods must be positive");
}

ProcessedHistory::ProcessedHistory(std::size_t capacity) : ring_(std::max<std::size_t>(capacity, 1)) {}

void ProcessedHistory::push(const MultiSample& s) {
  if (size_ == 0) first_ever_ = s.index;
  newest_ = s.index;
  ring_[static_cast<std::size_t>(s.index) % ring_.size()] = s.values;
  size_ = std::min(size_ + 1, ring_.size());
}

bool ProcessedHistory::covers(SampleIndex from, SampleIndex to) const noexcept {
  return size_ > 0 && from >= oldest() && to <= newest_ && from <= to;
}

double ProcessedHistory::value(SampleIndex index, std::size_t sensor) const {
  if (!covers(index, index)) fail(Errc::Capacity, "sample " + std::to_string(index) + " not in history");
  return ring_[static_cast<std::size_t>(index) % ring_.size()][sensor];
}

double ProcessedHistory::trailing_mean(std::size_t sensor, std::size_t n) const {
  const std::size_t count = std::min(n, size_);
  if (count == 0) return 0.0;
  double sum = 0;
  for (std::size_t k = 0; k < count; ++k) {
    sum += ring_[static_cast<std::size_t>(newest_ - static_cast<SampleIndex>(k)) % ring_.size()][sensor];
  }
  return sum / static_cast<double>(count);
}

std::array<SensorDetectorState, kNumSensors> initialize_offsets(
    const std::array<std::vector<double>, kNumSensors>& prefix, std::size_t p_0a, double phi) {
  require(p_0a > 0, Errc::InvalidParameter, "p_0a must be positive");
  std::array<SensorDetectorState, kNumSensors> states{};
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    if (prefix[s].size() < p_0a) {
      fail(Errc::InsufficientData, "offset initialisation needs " + std::to_string(p_0a) + " samples");
    }
    double sum = 0;
    for (std::size_t j = 0; j < p_0a; ++j) sum += prefix[s][j];
    states[s].lambda = sum / static_cast<double>(p_0a);
    states[s].delta = phi;
    states[s].prev_value = prefix[s][p_0a - 1];
  }
  return states;
}

double update_threshold(std::span<const double> window, double lambda, double phi, std::size_t p1) {
  if (window.size() != p1 || p1 == 0) {
    fail(Errc::InvalidWindow, "threshold window must hold exactly p1=" + std::to_string(p1) + " values");
  }
  double sum = 0;
  for (double x : window) sum += x - lambda;
  return sum / static_cast<double>(p1) + phi;
}

GestureFrame extract_frame(const ProcessedHistory& history, SampleIndex start, SampleIndex end,
                           const std::array<double, kNumSensors>& lambda) {
  require(start < end, Errc::InvalidParameter, "frame requires START < END");
  if (history.empty()) fail(Errc::Capacity, "empty history");
  start = std::max(start, history.first_ever());
  if (!history.covers(start, end)) {
    fail(Errc::Capacity, "frame [" + std::to_string(start) + "," + std::to_string(end) +
                             "] not covered by history [" + std::to_string(history.oldest()) + "," +
                             std::to_string(history.newest()) + "]");
  }
  GestureFrame f;
  f.start = start;
  f.end = end;
  f.lambda = lambda;
  const auto len = static_cast<std::size_t>(end - start + 1);
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    f.channels[s].resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      f.channels[s][i] = history.value(start + static_cast<SampleIndex>(i), s) - lambda[s];
    }
  }
  return f;
}

Detector::Detector(DetectorConfig cfg) : cfg_(cfg), history_(cfg.history_capacity()) {
  cfg_.validate();
  require(cfg_.history_capacity() >= cfg_.p1, Errc::InvalidParameter, "history must hold at least p1 samples");
}

std::vector<GestureFrame> Detector::run(const ProcessedStream& stream) {
  std::vector<GestureFrame> out;
  MultiSample m;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    m.index = stream.first_index + static_cast<SampleIndex>(i);
    for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = stream.channels[s][i];
    if (auto f = step(m)) out.push_back(std::move(*f));
  }
  return out;
}

std::optional<GestureFrame> Detector::step(const MultiSample& processed) {
  const SampleIndex j = processed.index;
  if (last_index_ != 0 && j <= last_index_) {
    fail(Errc::Ordering, "sample index " + std::to_string(j) + " after " + std::to_string(last_index_));
  }
  for (double v : processed.values) require(std::isfinite(v), Errc::InvalidInput, "non-finite processed sample");
  last_index_ = j;
  history_.push(processed);

  if (!initialized_) {
    for (std::size_t s = 0; s < kNumSensors; ++s) prefix_[s].push_back(processed.values[s]);
    if (prefix_[0].size() == cfg_.p_0a) {
      states_ = initialize_offsets(prefix_, cfg_.p_0a, cfg_.phi);
      prefix_ = {};
      initialized_ = true;
    }
    return std::nullopt;
  }

  for (std::size_t s = 0; s < kNumSensors; ++s) step_sensor(s, j, processed.values[s]);

  if (j <= static_cast<SampleIndex>(cfg_.p_0b)) return std::nullopt;
  auto bounds = merge(j);
  if (!bounds) return std::nullopt;

  std::array<double, kNumSensors> lambda{};
  for (std::size_t s = 0; s < kNumSensors; ++s) lambda[s] = states_[s].lambda;
  GestureFrame frame = extract_frame(history_, bounds->start, bounds->end, lambda);
  frame.k = ++emitted_;
  logger()->debug("frame {} emitted: [{}, {}]", frame.k, frame.start, frame.end);
  return frame;
}

void Detector::step_sensor(std::size_t s, SampleIndex j, double x) {
  auto& st = states_[s];
  if (!st.open()) {
    st.init_sum += x;
    ++st.init_count;
  }

  const bool above = x - st.lambda > st.delta;
  const bool prev_above = st.prev_value - st.lambda > st.delta;

  if (above && !prev_above) {
    // Upward crossing. A crossing inside a pending frame extends it.
    if (st.start == 0) {
      const SampleIndex shifted = j - static_cast<SampleIndex>(cfg_.p_s);
      if (shifted < 1) {
        ++diag_.clamped_starts;
        logger()->info("sensor {}: start {} clamped to 1", s + 1, shifted);
      }
      st.start = std::max<SampleIndex>(shifted, 1);
      st.reopened_end = 0;
    } else if (st.end != 0) {
      st.reopened_end = st.end;
      st.end = 0;
    }
    st.last_up = j;
  } else if (above) {
    ++st.cnt;
  } else if (prev_above) {
    // Downward crossing.
    st.cnt = 0;
    if (st.start == 0) {
      ++diag_.ignored_downward;
      logger()->debug("sensor {}: downward crossing at {} without an open frame", s + 1, j);
    } else if (j - st.last_up > static_cast<SampleIndex>(cfg_.max_crossing_window)) {
      ++diag_.discarded_crossings;
      if (st.reopened_end != 0) {
        st.end = st.reopened_end;
      } else {
        st.start = 0;
        st.end = 0;
      }
      st.reopened_end = 0;
    } else {
      st.end = j + static_cast<SampleIndex>(cfg_.p_e);
      st.reopened_end = 0;
    }
  } else if (!st.open() && j % static_cast<SampleIndex>(cfg_.p1) == 0) {
    if (st.init_count > 0) st.lambda = st.init_mean();
    const double base = history_.trailing_mean(s, cfg_.p1) - st.lambda;
    st.delta = base + cfg_.phi;
    st.init_sum = 0;
    st.init_count = 0;
    ++diag_.threshold_updates;
  }

  if (above && st.cnt > cfg_.p_safe) {
    // Sustained surge: treat as malfunction, drop any open frame and re-level.
    st.delta = history_.trailing_mean(s, cfg_.p1) + (cfg_.safety_adds_phi ? cfg_.phi : 0.0);
    st.cnt = 0;
    st.start = 0;
    st.end = 0;
    st.reopened_end = 0;
    ++diag_.safety_recomputes;
    logger()->info("sensor {}: safety recompute at {}, delta={}", s + 1, j, st.delta);
  }

  if (st.end != 0 && j >= st.end) {
    if (j > static_cast<SampleIndex>(cfg_.p_0b)) {
      st.frames.push_back({st.start, st.end});
    } else {
      ++diag_.warmup_drops;
    }
    st.start = 0;
    st.end = 0;
    st.reopened_end = 0;
  }

  st.prev_value = x;
}

std::optional<FrameBounds> Detector::merge(SampleIndex j) {
  if (cfg_.merge_policy == MergePolicy::LastSensor) {
    for (const auto& st : states_) {
      if (!st.frames.empty()) literal_bounds_ = st.frames.back();
    }
    if (j == literal_bounds_.end && literal_bounds_.start != 0 && literal_bounds_.end != 0) {
      const FrameBounds out = literal_bounds_;
      for (auto& st : states_) st.frames.clear();
      literal_bounds_ = {};
      return out;
    }
    return std::nullopt;
  }

  // Union: wait until no sensor holds an open interval, then cover every
  // completed per-sensor frame.
  bool any = false;
  FrameBounds out{0, 0};
  for (const auto& st : states_) {
    if (st.open()) return std::nullopt;
    for (const auto& f : st.frames) {
      out.start = any ? std::min(out.start, f.start) : f.start;
      out.end = any ? std::max(out.end, f.end) : f.end;
      any = true;
    }
  }
  if (!any) return std::nullopt;
  for (auto& st : states_) st.frames.clear();
  return out;
}

}  // namespace capstream
