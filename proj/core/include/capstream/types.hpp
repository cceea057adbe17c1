#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace capstream {

inline constexpr std::size_t kNumSensors = 4;
inline constexpr int kNumClasses = 10;

/// 1-based sensor index on the 2x2 plate grid:
///   1 = top-left, 2 = top-right, 3 = bottom-left, 4 = bottom-right.
class SensorId {
 public:
  explicit SensorId(int index);

  int index() const noexcept { return index_; }
  std::size_t slot() const noexcept { return static_cast<std::size_t>(index_ - 1); }

  friend bool operator==(SensorId, SensorId) = default;
  friend auto operator<=>(SensorId, SensorId) = default;

 private:
  int index_;
};

/// Sample ordinals are 1-based; 0 is reserved as "unset" by the detector.
using SampleIndex = std::int64_t;

struct RawSample {
  SensorId sensor;
  SampleIndex index;
  double value;  // V
};

/// One synchronous reading of all four plates.
struct MultiSample {
  SampleIndex index = 0;
  std::array<double, kNumSensors> values{};
};

/// Four equal-length channels sampled at a common rate. channel(s)[i] holds
/// the value for sample index first_index + i.
class RawStream {
 public:
  RawStream() = default;
  RawStream(double sampling_rate, std::array<std::vector<double>, kNumSensors> channels,
            SampleIndex first_index = 1);

  double sampling_rate() const noexcept { return rate_; }
  std::size_t size() const noexcept { return channels_[0].size(); }
  bool empty() const noexcept { return size() == 0; }
  SampleIndex first_index() const noexcept { return first_index_; }

  const std::vector<double>& channel(std::size_t slot) const { return channels_.at(slot); }
  const std::vector<double>& channel(SensorId s) const { return channels_.at(s.slot()); }
  std::vector<double>& mutable_channel(std::size_t slot) { return channels_.at(slot); }
  const std::array<std::vector<double>, kNumSensors>& channels() const noexcept { return channels_; }

  MultiSample at(std::size_t position) const;
  RawSample sample(SensorId s, std::size_t position) const;

  friend bool operator==(const RawStream&, const RawStream&) = default;

 private:
  double rate_ = 1.0;
  SampleIndex first_index_ = 1;
  std::array<std::vector<double>, kNumSensors> channels_{};
};

}  // namespace capstream
