#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "capstream/types.hpp"

namespace capstream {

enum class DspScheme {
  SequentialDifference,  // tau-weighted absolute sequential difference, moving-average smoothed
  WeightedSum,           // tau-weighted sum of consecutive samples, smoothed (kept for comparison)
  PairwiseDifference,    // |x_s - x_s'| over the six sensor pairs
  LowPass,               // spectral low-pass over a trailing window
};

std::string_view to_string(DspScheme scheme);
DspScheme parse_dsp_scheme(std::string_view name);

struct DspConfig {
  DspScheme scheme = DspScheme::SequentialDifference;
  std::array<double, kNumSensors> tau{0.5, 0.5, 0.5, 0.5};
  std::size_t w_smooth = 5;       // samples
  std::size_t p1 = 318;           // samples, offset/threshold period
  double lpf_cutoff = 50.0;       // Hz
  std::size_t lpf_window = 64;    // samples, trailing window of the streaming low-pass

  void validate() const;
};

/// Conditioned signal per sensor, before offset subtraction. channels[s][i]
/// belongs to sample index first_index + i.
struct ProcessedStream {
  double sampling_rate = 1.0;
  SampleIndex first_index = 1;
  std::array<std::vector<double>, kNumSensors> channels{};

  std::size_t size() const noexcept { return channels[0].size(); }
};

struct Spectrum {
  std::vector<double> frequencies;  // Hz, ascending, bins 0..N/2
  std::vector<double> magnitudes;   // |F(u)|
  std::size_t padded_length = 0;    // N
};

struct BandStats {
  double low = 0;   // Hz
  double high = 0;  // Hz
  double mean = 0;
  double stddev = 0;
};

/// |x_j - x_{j-1}| for one channel; length n-1.
std::vector<double> sequential_difference(std::span<const double> channel);
std::array<std::vector<double>, kNumSensors> sequential_difference(const RawStream& stream);

/// (2/w) * sum over the trailing w samples of |tau x_k - (1 - tau) x_{k-1}|.
ProcessedStream weighted_smoothed_difference(const RawStream& stream, const DspConfig& cfg);

/// (1/w) * sum over the trailing w samples of (tau x_k + (1 - tau) x_{k-1}).
ProcessedStream weighted_smoothed_sum(const RawStream& stream, const DspConfig& cfg);

std::vector<double> pairwise_sensor_difference(const RawStream& stream, SensorId a, SensorId b);

/// The six unordered sensor pairs, lexicographic.
std::vector<std::pair<SensorId, SensorId>> sensor_pairs();

/// Next power of two >= n.
std::size_t padded_size(std::size_t n);

/// Full complex DFT of the zero-padded signal (length padded_size(n)).
std::vector<std::complex<double>> fft_complex(std::span<const double> signal);

/// One-sided magnitude spectrum of the zero-padded signal; bin k is at k*rate/N Hz.
Spectrum fft(std::span<const double> signal, double sampling_rate);

/// Band-pass by spectral masking, inverse transform, then mean and standard
/// deviation of the band-passed magnitudes.
std::vector<BandStats> band_statistics(std::span<const double> signal, double sampling_rate,
                                       const std::vector<std::pair<double, double>>& bands);

/// The five 100 Hz-wide bands from 1 Hz to 500 Hz.
std::vector<std::pair<double, double>> default_bands();

/// Spectral low-pass: keeps bins up to the cutoff (rounded to the nearest bin)
/// and inverse-transforms; output has the input's length.
std::vector<double> low_pass(std::span<const double> signal, double sampling_rate, double cutoff);

/// Streaming conditioner for one sensor. push() returns a value once enough
/// history exists (w_smooth + 1 samples for the difference schemes).
class ChannelConditioner {
 public:
  ChannelConditioner(const DspConfig& cfg, double tau, double sampling_rate);

  std::optional<double> push(double x);
  void reset();

 private:
  DspScheme scheme_;
  double tau_;
  double rate_;
  double cutoff_;
  std::size_t window_;
  std::optional<double> prev_;
  std::deque<double> terms_;
};

/// Conditions all four sensors in lockstep. The value emitted for the raw
/// sample at index j carries index j.
class StreamConditioner {
 public:
  StreamConditioner(const DspConfig& cfg, double sampling_rate);

  std::optional<MultiSample> push(const MultiSample& raw);
  void reset();

  /// Number of leading raw samples that produce no output.
  std::size_t latency() const noexcept { return latency_; }

 private:
  std::array<ChannelConditioner, kNumSensors> channels_;
  std::size_t latency_;
};

}  // namespace capstream
