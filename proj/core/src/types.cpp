#include "capstream/types.hpp"

#include <cmath>

#include "capstream/error.hpp"

namespace capstream {

SensorId::SensorId(int index) : index_(index) {
  require(index >= 1 && index <= static_cast<int>(kNumSensors), Errc::InvalidParameter,
          "sensor index must be in [1,4]");
}

RawStream::RawStream(double sampling_rate, std::array<std::vector<double>, kNumSensors> channels,
                     SampleIndex first_index)
    : rate_(sampling_rate), first_index_(first_index), channels_(std::move(channels)) {
  require(sampling_rate > 0 && std::isfinite(sampling_rate), Errc::InvalidParameter,
          "sampling rate must be positive");
  for (const auto& ch : channels_) {
    require(ch.size() == channels_[0].size(), Errc::InvalidInput, "channels must have equal length");
  }
}

MultiSample RawStream::at(std::size_t position) const {
  MultiSample m;
  m.index = first_index_ + static_cast<SampleIndex>(position);
  for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = channels_[s].at(position);
  return m;
}

RawSample RawStream::sample(SensorId s, std::size_t position) const {
  return RawSample{s, first_index_ + static_cast<SampleIndex>(position), channels_[s.slot()].at(position)};
}

}  // namespace capstream
