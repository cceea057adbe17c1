#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "capstream/dsp.hpp"
#include "capstream/types.hpp"

namespace capstream {

enum class MergePolicy {
  Union,         // START = min start_s, END = max end_s over all sensors
  LastSensor,  // last sensor (in index order) holding a frame sets START/END
};

std::string_view to_string(MergePolicy policy);
MergePolicy parse_merge_policy(std::string_view name);

struct DetectorConfig {
  double phi = 20.0;                       // V, threshold floor
  std::size_t p1 = 318;                    // samples, offset/threshold update period
  std::size_t p_s = 70;                    // samples added before the upward crossing
  std::size_t p_e = 70;                    // samples added after the downward crossing
  std::size_t p_safe = 159;                // samples above threshold before a safety recompute
  std::size_t p_0a = 530;                  // samples used for the initial offset
  std::size_t p_0b = 424;                  // warm-up: no frames are recorded before this index
  std::size_t max_crossing_window = 50;    // samples between an upward and downward crossing
  MergePolicy merge_policy = MergePolicy::Union;
  bool safety_adds_phi = false;            // add phi to the safety-recomputed threshold

  /// Periods scaled from seconds at `rate` Hz: p1 = 6 s, p_0a = 10 s,
  /// p_0b = 8 s, p_safe = 3 s. Sample-count shifts keep their defaults.
  static DetectorConfig for_rate(double rate);

  void validate() const;

  /// Ring-buffer length of the processed history kept per sensor.
  std::size_t history_capacity() const noexcept { return 2 * (p_s + p_e + p_safe + p1); }
};

struct FrameBounds {
  SampleIndex start = 0;
  SampleIndex end = 0;
  friend bool operator==(const FrameBounds&, const FrameBounds&) = default;
};

struct SensorDetectorState {
  double lambda = 0;       // offset
  double delta = 0;        // threshold
  SampleIndex start = 0;   // 0 = unset
  SampleIndex end = 0;     // 0 = unset
  double init_sum = 0;     // init_s, kept as a running sum
  std::size_t init_count = 0;
  std::size_t cnt = 0;     // consecutive samples above threshold
  std::vector<FrameBounds> frames;

  double prev_value = 0;   // processed value at j-1
  SampleIndex last_up = 0;
  SampleIndex reopened_end = 0;

  bool open() const noexcept { return start != 0 || end != 0; }
  double init_mean() const noexcept { return init_count ? init_sum / static_cast<double>(init_count) : 0.0; }
};

struct GestureFrame {
  std::size_t k = 0;      // 1-based ordinal
  SampleIndex start = 0;  // START
  SampleIndex end = 0;    // END
  std::array<double, kNumSensors> lambda{};
  std::array<std::vector<double>, kNumSensors> channels{};  // processed value minus lambda

  std::size_t length() const noexcept { return channels[0].size(); }
};

struct DetectorDiagnostics {
  std::size_t threshold_updates = 0;
  std::size_t safety_recomputes = 0;
  std::size_t ignored_downward = 0;    // downward crossing with no open frame
  std::size_t discarded_crossings = 0; // pairs wider than max_crossing_window
  std::size_t clamped_starts = 0;
  std::size_t warmup_drops = 0;
};

/// Fixed-capacity history of processed samples, addressed by sample index.
class ProcessedHistory {
 public:
  explicit ProcessedHistory(std::size_t capacity);

  void push(const MultiSample& s);

  bool empty() const noexcept { return size_ == 0; }
  std::size_t capacity() const noexcept { return ring_.size(); }
  SampleIndex first_ever() const noexcept { return first_ever_; }
  SampleIndex oldest() const noexcept { return newest_ - static_cast<SampleIndex>(size_) + 1; }
  SampleIndex newest() const noexcept { return newest_; }
  bool covers(SampleIndex from, SampleIndex to) const noexcept;

  double value(SampleIndex index, std::size_t sensor) const;

  /// Mean of the last n values of a sensor (fewer if less history exists).
  double trailing_mean(std::size_t sensor, std::size_t n) const;

 private:
  std::vector<std::array<double, kNumSensors>> ring_;
  std::size_t size_ = 0;
  SampleIndex newest_ = 0;
  SampleIndex first_ever_ = 0;
};

/// Initial offsets from the first p_0a processed samples of each sensor:
/// lambda = prefix mean, delta = phi, frame bounds unset.
std::array<SensorDetectorState, kNumSensors> initialize_offsets(
    const std::array<std::vector<double>, kNumSensors>& prefix, std::size_t p_0a, double phi);

/// Threshold from the last p1 processed values: mean(x - lambda) + phi.
double update_threshold(std::span<const double> window, double lambda, double phi, std::size_t p1);

/// Slice [start, end] of the history with the per-sensor offsets subtracted.
/// A start before the first sample ever seen is clamped to it; a start that has
/// been evicted from the ring raises a capacity error.
GestureFrame extract_frame(const ProcessedHistory& history, SampleIndex start, SampleIndex end,
                           const std::array<double, kNumSensors>& lambda);

/// Adaptive-threshold detector over the four processed channels. Feed one
/// MultiSample per index in increasing order; a frame is returned on the
/// sample at which it closes.
class Detector {
 public:
  explicit Detector(DetectorConfig cfg);

  std::optional<GestureFrame> step(const MultiSample& processed);

  /// Runs a whole processed stream and returns every emitted frame.
  std::vector<GestureFrame> run(const ProcessedStream& stream);

  bool initialized() const noexcept { return initialized_; }
  const DetectorConfig& config() const noexcept { return cfg_; }
  const SensorDetectorState& sensor(std::size_t slot) const { return states_.at(slot); }
  const ProcessedHistory& history() const noexcept { return history_; }
  const DetectorDiagnostics& diagnostics() const noexcept { return diag_; }
  std::size_t frames_emitted() const noexcept { return emitted_; }

 private:
  void step_sensor(std::size_t s, SampleIndex j, double x);
  std::optional<FrameBounds> merge(SampleIndex j);

  DetectorConfig cfg_;
  ProcessedHistory history_;
  std::array<SensorDetectorState, kNumSensors> states_{};
  std::array<std::vector<double>, kNumSensors> prefix_{};
  bool initialized_ = false;
  SampleIndex last_index_ = 0;
  FrameBounds literal_bounds_{};
  std::size_t emitted_ = 0;
  DetectorDiagnostics diag_{};
};

}  // namespace capstream
