#include "capstream/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iostream>
#include <iterator>
#include <thread>

#include <spdlog/spdlog.h>

#include "capstream/error.hpp"
#include "capstream/log.hpp"
#include "capstream/metrics.hpp"
#include "capstream/recording_io.hpp"

namespace capstream {

using Clock = std::chrono::steady_clock;

ReplaySource::ReplaySource(RawStream stream, Pacing pacing, std::string name)
    : stream_(std::move(stream)), pacing_(pacing), name_(std::move(name)) {}

std::optional<MultiSample> ReplaySource::next() {
  if (pos_ >= stream_.size()) return std::nullopt;
  if (pacing_ == Pacing::Realtime) {
    if (pos_ == 0) start_ = Clock::now();
    const auto due = start_ + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(static_cast<double>(pos_) / stream_.sampling_rate()));
    std::this_thread::sleep_until(due);
  }
  return stream_.at(pos_++);
}

std::optional<MultiSample> parse_sample_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  if (line.empty()) return std::nullopt;
  if (line.rfind("index", 0) == 0) return std::nullopt;
  MultiSample m;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  auto bad = [&] { fail(Errc::InvalidInput, "malformed sample line: '" + std::string(line) + "'"); };
  auto r = std::from_chars(p, end, m.index);
  if (r.ec != std::errc() || r.ptr == end || *r.ptr != ',') bad();
  p = r.ptr + 1;
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    auto rv = std::from_chars(p, end, m.values[s]);
    if (rv.ec != std::errc() || !std::isfinite(m.values[s])) bad();
    p = rv.ptr;
    if (s + 1 < kNumSensors) {
      if (p == end || *p != ',') bad();
      ++p;
    }
  }
  if (p != end) bad();
  return m;
}

namespace {

void check_order(SampleIndex& last, SampleIndex index, const std::string& who) {
  if (last != 0 && index != last + 1) {
    fail(Errc::Ordering, who + ": sample " + std::to_string(index) + " after " + std::to_string(last));
  }
  last = index;
}

}  // namespace

LineSource::LineSource(std::istream& in, double sampling_rate, std::string name)
    : in_(in), rate_(sampling_rate), name_(std::move(name)) {
  require(sampling_rate > 0, Errc::Config, "live source needs a positive sampling rate");
}

std::optional<MultiSample> LineSource::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (auto m = parse_sample_line(line)) {
      check_order(last_, m->index, name_);
      return m;
    }
  }
  return std::nullopt;
}

TcpLineSource::TcpLineSource(const Endpoint& ep, double sampling_rate)
    : ep_(ep), sock_(connect_to(ep)), rate_(sampling_rate) {
  require(sampling_rate > 0, Errc::Config, "live source needs a positive sampling rate");
}

std::optional<MultiSample> TcpLineSource::next() {
  std::string line;
  while (sock_.read_line(line)) {
    if (auto m = parse_sample_line(line)) {
      check_order(last_, m->index, describe());
      return m;
    }
  }
  return std::nullopt;
}

namespace {

class StdinSource : public LineSource {
 public:
  explicit StdinSource(double rate) : LineSource(std::cin, rate, "stdin") {}
};

}  // namespace

std::unique_ptr<StreamSource> make_source(std::string_view spec, Pacing pacing, double live_rate) {
  if (spec == "stdin" || spec == "-") return std::make_unique<StdinSource>(live_rate);
  if (spec.rfind("tcp:", 0) == 0) return std::make_unique<TcpLineSource>(parse_endpoint(spec.substr(4)), live_rate);
  std::string_view path = spec;
  if (spec.rfind("file:", 0) == 0) path = spec.substr(5);
  if (path.empty()) fail(Errc::Config, "empty source path");
  auto rec = read_recording(std::filesystem::path(path), live_rate);
  return std::make_unique<ReplaySource>(std::move(rec.stream), pacing, "file:" + std::string(path));
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys = {
      "seed",
      "sampling_rate",
      "stream.rate",
      "dsp.scheme",
      "dsp.tau",
      "dsp.tau1",
      "dsp.tau2",
      "dsp.tau3",
      "dsp.tau4",
      "dsp.w_smooth",
      "dsp.p1",
      "dsp.lpf_cutoff",
      "dsp.lpf_window",
      "detector.phi",
      "detector.p1",
      "detector.p_s",
      "detector.p_e",
      "detector.p_safe",
      "detector.p_0a",
      "detector.p_0b",
      "detector.max_crossing_window",
      "detector.merge_policy",
      "detector.safety_adds_phi",
      "train.epochs",
      "train.batch_size",
      "train.learning_rate",
      "train.seed",
      "train.validation_fraction",
      "train.reduction",
      "model.cell",
      "model.hidden",
      "model.frame_length",
      "runtime.max_send_attempts",
      "runtime.initial_backoff_ms",
      "runtime.max_backoff_ms",
      "sim.dielectric_constant",
      "sim.plate_area",
      "sim.coulomb_constant",
      "sim.charge_q1",
      "sim.charge_q2",
      "sim.min_distance",
      "sim.max_distance",
      "sim.plate_spacing",
      "sim.discharge",
      "sim.capacity",
      "sim.discharge_period",
      "sim.idle_sigma",
  };
  for (int s = 1; s <= static_cast<int>(kNumSensors); ++s) keys.push_back("sim.baseline" + std::to_string(s));
  return keys;
}

namespace {

std::size_t get_count(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  const long long v = cfg.get_int(key, static_cast<long long>(fallback));
  if (v < 0) fail(Errc::Config, key + " must not be negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

void apply_config(const KeyValueConfig& cfg, DspConfig& dsp) {
  if (cfg.has("dsp.scheme")) dsp.scheme = parse_dsp_scheme(cfg.get_string("dsp.scheme", ""));
  if (cfg.has("dsp.tau")) dsp.tau.fill(cfg.get_double("dsp.tau", 0.5));
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    dsp.tau[s] = cfg.get_double("dsp.tau" + std::to_string(s + 1), dsp.tau[s]);
  }
  dsp.w_smooth = get_count(cfg, "dsp.w_smooth", dsp.w_smooth);
  dsp.p1 = get_count(cfg, "dsp.p1", dsp.p1);
  dsp.lpf_cutoff = cfg.get_double("dsp.lpf_cutoff", dsp.lpf_cutoff);
  dsp.lpf_window = get_count(cfg, "dsp.lpf_window", dsp.lpf_window);
}

void apply_config(const KeyValueConfig& cfg, DetectorConfig& det) {
  det.phi = cfg.get_double("detector.phi", det.phi);
  det.p1 = get_count(cfg, "detector.p1", det.p1);
  det.p_s = get_count(cfg, "detector.p_s", det.p_s);
  det.p_e = get_count(cfg, "detector.p_e", det.p_e);
  det.p_safe = get_count(cfg, "detector.p_safe", det.p_safe);
  det.p_0a = get_count(cfg, "detector.p_0a", det.p_0a);
  det.p_0b = get_count(cfg, "detector.p_0b", det.p_0b);
  det.max_crossing_window = get_count(cfg, "detector.max_crossing_window", det.max_crossing_window);
  if (cfg.has("detector.merge_policy")) det.merge_policy = parse_merge_policy(cfg.get_string("detector.merge_policy", ""));
  det.safety_adds_phi = cfg.get_bool("detector.safety_adds_phi", det.safety_adds_phi);
}

void apply_config(const KeyValueConfig& cfg, TrainConfig& train) {
  train.epochs = static_cast<int>(cfg.get_int("train.epochs", train.epochs));
  train.batch_size = static_cast<int>(cfg.get_int("train.batch_size", train.batch_size));
  train.learning_rate = cfg.get_double("train.learning_rate", train.learning_rate);
  train.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(train.seed)));
  train.validation_fraction = cfg.get_double("train.validation_fraction", train.validation_fraction);
  if (cfg.has("train.reduction")) train.reduction = parse_gradient_reduction(cfg.get_string("train.reduction", ""));
}

void apply_config(const KeyValueConfig& cfg, ModelSpec& spec) {
  if (cfg.has("model.cell")) spec.cell = parse_cell_type(cfg.get_string("model.cell", ""));
  spec.hidden = static_cast<int>(cfg.get_int("model.hidden", spec.hidden));
  spec.frame_length = static_cast<int>(cfg.get_int("model.frame_length", spec.frame_length));
}

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& cfg, double rate) {
  PipelineConfig pc;
  pc.detector = DetectorConfig::for_rate(rate);
  apply_config(cfg, pc.detector);
  pc.dsp.p1 = pc.detector.p1;
  apply_config(cfg, pc.dsp);
  pc.max_send_attempts = get_count(cfg, "runtime.max_send_attempts", pc.max_send_attempts);
  pc.initial_backoff = std::chrono::milliseconds(cfg.get_int("runtime.initial_backoff_ms", pc.initial_backoff.count()));
  pc.max_backoff = std::chrono::milliseconds(cfg.get_int("runtime.max_backoff_ms", pc.max_backoff.count()));
  return pc;
}

void PipelineConfig::validate() const {
  dsp.validate();
  detector.validate();
  require(dsp.scheme != DspScheme::PairwiseDifference, Errc::Config,
          "pairwise-diff cannot feed the per-sensor detector");
  require(max_send_attempts >= 1, Errc::Config, "runtime.max_send_attempts must be >= 1");
  require(initial_backoff.count() >= 0 && max_backoff >= initial_backoff, Errc::Config,
          "backoff bounds must satisfy 0 <= initial <= max");
  if (!std::filesystem::exists(model_path)) fail(Errc::Io, "model file not found: " + model_path.string());
  (void)load_model(model_path);
}

ProcessedStream condition(const RawStream& stream, const DspConfig& cfg) {
  StreamConditioner cond(cfg, stream.sampling_rate());
  ProcessedStream out;
  out.sampling_rate = stream.sampling_rate();
  out.first_index = stream.first_index() + static_cast<SampleIndex>(cond.latency());
  for (auto& ch : out.channels) ch.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (auto p = cond.push(stream.at(i))) {
      for (std::size_t s = 0; s < kNumSensors; ++s) out.channels[s].push_back(p->values[s]);
    }
  }
  return out;
}

std::vector<GestureFrame> detect_frames(const RawStream& stream, const DspConfig& dsp, const DetectorConfig& det,
                                        DetectorDiagnostics* diagnostics) {
  StreamConditioner cond(dsp, stream.sampling_rate());
  Detector detector(det);
  std::vector<GestureFrame> frames;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (auto p = cond.push(stream.at(i))) {
      if (auto f = detector.step(*p)) frames.push_back(std::move(*f));
    }
  }
  if (diagnostics) *diagnostics = detector.diagnostics();
  return frames;
}

std::vector<LabeledTensor> labeled_tensors(const LabeledRecording& rec, const DspConfig& dsp,
                                           const DetectorConfig& det, int frame_length) {
  std::vector<LabeledTensor> out;
  if (rec.events.empty()) return out;
  const auto frames = detect_frames(rec.stream, dsp, det);
  const auto matches = match_events(frame_intervals(frames), event_intervals(rec.events));
  std::optional<ProcessedStream> processed;
  for (const auto& m : matches) {
    const auto& ev = rec.events[m.event];
    if (m.frame) {
      out.push_back({frame_to_tensor(frames[*m.frame], frame_length), ev.class_id});
      continue;
    }
    // Missed by the detector: cut the padded event from the processed stream.
    if (!processed) processed = condition(rec.stream, dsp);
    const SampleIndex first = processed->first_index;
    const SampleIndex last = first + static_cast<SampleIndex>(processed->size()) - 1;
    const SampleIndex lo = std::max(first, ev.true_start - static_cast<SampleIndex>(det.p_s));
    const SampleIndex hi = std::min(last, ev.true_end + static_cast<SampleIndex>(det.p_e));
    if (hi <= lo) continue;
    std::array<std::vector<double>, kNumSensors> channels;
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      const auto& src = processed->channels[s];
      channels[s].assign(src.begin() + (lo - first), src.begin() + (hi - first) + 1);
    }
    logger()->debug("event [{}, {}] not detected, using padded interval", ev.true_start, ev.true_end);
    out.push_back({channels_to_tensor(channels, frame_length), ev.class_id});
  }
  return out;
}

std::vector<LabeledTensor> labeled_tensors(const std::vector<LabeledRecording>& recs, const DspConfig& dsp,
                                           const DetectorConfig& det, int frame_length) {
  std::vector<LabeledTensor> out;
  for (const auto& rec : recs) {
    auto part = labeled_tensors(rec, dsp, det, frame_length);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

namespace {

struct FrameItem {
  GestureFrame frame;
  Clock::time_point emitted;
};

struct MessageItem {
  CommandMessage message;
  Clock::time_point emitted;
};

// Socket writer with lazy connection and bounded exponential backoff.
class Emitter {
 public:
  explicit Emitter(const PipelineConfig& cfg) : cfg_(cfg) {}

  bool send(const std::string& line) {
    if (!cfg_.endpoint) return false;
    auto backoff = cfg_.initial_backoff;
    for (std::size_t attempt = 1; attempt <= cfg_.max_send_attempts; ++attempt) {
      try {
        if (!sock_.valid()) sock_ = connect_to(*cfg_.endpoint);
        sock_.send_all(line);
        return true;
      } catch (const Error& e) {
        sock_.close();
        logger()->warn("emit attempt {}/{} to {} failed: {}", attempt, cfg_.max_send_attempts,
                       cfg_.endpoint->to_string(), e.what());
        if (attempt < cfg_.max_send_attempts) {
          std::this_thread::sleep_for(backoff);
          backoff = std::min(cfg_.max_backoff, backoff * 2);
        }
      }
    }
    return false;
  }

 private:
  const PipelineConfig& cfg_;
  Socket sock_;
};

}  // namespace

PipelineSummary run_pipeline(StreamSource& source, const Model& model, const PipelineConfig& cfg,
                             const MessageObserver& observer) {
  cfg.dsp.validate();
  cfg.detector.validate();
  require(cfg.dsp.scheme != DspScheme::PairwiseDifference, Errc::Config,
          "pairwise-diff cannot feed the per-sensor detector");
  const double rate = source.sampling_rate();
  const auto capacity = static_cast<std::size_t>(std::ceil(4.0 * rate));
  BoundedQueue<FrameItem> frames_q(capacity);
  BoundedQueue<MessageItem> messages_q(capacity);

  PipelineSummary summary;
  const auto t0 = Clock::now();
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto record_failure = [&](std::exception_ptr e) {
    std::lock_guard lock(failure_mu);
    if (!failure) failure = e;
  };

  std::thread detect_stage([&] {
    try {
      StreamConditioner cond(cfg.dsp, rate);
      Detector detector(cfg.detector);
      while (auto raw = source.next()) {
        ++summary.samples;
        auto p = cond.push(*raw);
        if (!p) continue;
        if (auto f = detector.step(*p)) {
          ++summary.frames;
          if (!frames_q.push({std::move(*f), Clock::now()})) break;
        }
      }
      summary.diagnostics = detector.diagnostics();
      summary.stop_reason = "end of stream";
    } catch (const std::exception& e) {
      summary.stop_reason = std::string("source stopped: ") + e.what();
      record_failure(std::current_exception());
    }
    frames_q.close();
  });

  std::thread classify_stage([&] {
    try {
      while (auto item = frames_q.pop()) {
        const auto pred = predict(model, frame_to_tensor(item->frame, model.spec().frame_length));
        const auto ts = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
        auto msg = make_message(ts, item->frame.k, pred.class_id, pred.probabilities[pred.class_id - 1]);
        if (!messages_q.push({std::move(msg), item->emitted})) break;
      }
    } catch (...) {
      record_failure(std::current_exception());
      frames_q.close();
    }
    messages_q.close();
  });

  double latency_sum = 0;
  try {
    Emitter emitter(cfg);
    while (auto item = messages_q.pop()) {
      const std::string line = serialize_message(item->message) + "\n";
      const bool delivered = emitter.send(line);
      const double latency_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - item->emitted).count();
      latency_sum += latency_ms;
      summary.max_latency_ms = std::max(summary.max_latency_ms, latency_ms);
      ++summary.messages;
      if (delivered) {
        ++summary.delivered;
      } else if (cfg.endpoint) {
        ++summary.send_failures;
      }
      logger()->info("message {}", serialize_message(item->message));
      if (observer) observer(item->message);
    }
  } catch (...) {
    record_failure(std::current_exception());
    messages_q.close();
    frames_q.close();
  }
  detect_stage.join();
  classify_stage.join();

  summary.mean_latency_ms = summary.messages ? latency_sum / static_cast<double>(summary.messages) : 0.0;
  summary.elapsed_s = std::chrono::duration<double>(Clock::now() - t0).count();
  logger()->info("pipeline finished: {} samples, {} frames, {} messages ({})", summary.samples, summary.frames,
                 summary.messages, summary.stop_reason);
  if (failure) {
    // A broken source ends the run cleanly; anything else propagates.
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      if (e.code() != Errc::Io && e.code() != Errc::Ordering && e.code() != Errc::InvalidInput) throw;
      logger()->warn("{}", summary.stop_reason);
    }
  }
  return summary;
}

ConsumeSummary consume(Listener& listener, const MessageObserver& on_message, const ConsumeErrorObserver& on_error) {
  ConsumeSummary summary;
  auto conn = listener.accept();
  if (!conn) return summary;
  std::string line;
  while (conn->read_line(line)) {
    if (line.empty()) continue;
    try {
      const auto msg = parse_message(line);
      ++summary.received;
      if (on_message) on_message(msg);
    } catch (const Error& e) {
      ++summary.malformed;
      logger()->warn("malformed message skipped: {}", e.what());
      if (on_error) on_error(line, e.what());
    }
  }
  return summary;
}

}  // namespace capstream
