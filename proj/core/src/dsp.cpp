#include "capstream/dsp.hpp"

#include <cmath>
#include <mutex>

#include <fftw3.h>

#include "capstream/error.hpp"

namespace capstream {

namespace {

// FFTW planning is not re-entrant; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> transform(std::vector<std::complex<double>> data, int sign) {
  const int n = static_cast<int>(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return data;
}

std::vector<std::complex<double>> padded_complex(std::span<const double> signal) {
  std::vector<std::complex<double>> data(padded_size(signal.size()));
  for (std::size_t i = 0; i < signal.size(); ++i) data[i] = signal[i];
  return data;
}

// Inverse transform of a masked spectrum, truncated back to `length` samples.
std::vector<double> inverse_real(std::vector<std::complex<double>> spectrum, std::size_t length) {
  const double n = static_cast<double>(spectrum.size());
  auto time = transform(std::move(spectrum), FFTW_BACKWARD);
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = time[i].real() / n;
  return out;
}

void check_channels(const RawStream& stream, std::size_t min_len) {
  if (stream.size() < min_len) {
    fail(Errc::InsufficientData, "stream needs at least " + std::to_string(min_len) + " samples");
  }
}

ProcessedStream run_conditioner(const RawStream& stream, const DspConfig& cfg) {
  cfg.validate();
  check_channels(stream, cfg.w_smooth + 1);
  ProcessedStream out;
  out.sampling_rate = stream.sampling_rate();
  out.first_index = stream.first_index() + static_cast<SampleIndex>(cfg.w_smooth);
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    ChannelConditioner cond(cfg, cfg.tau[s], stream.sampling_rate());
    auto& dst = out.channels[s];
    dst.reserve(stream.size() - cfg.w_smooth);
    for (double x : stream.channel(s)) {
      if (auto v = cond.push(x)) dst.push_back(*v);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(DspScheme scheme) {
  switch (scheme) {
    case DspScheme::SequentialDifference: return "sequential-diff";
    case DspScheme::WeightedSum: return "weighted-sum";
    case DspScheme::PairwiseDifference: return "pairwise-diff";
    case DspScheme::LowPass: return "low-pass";
  }
  return "unknown";
}

DspScheme parse_dsp_scheme(std::string_view name) {
  for (auto s : {DspScheme::SequentialDifference, DspScheme::WeightedSum, DspScheme::PairwiseDifference,
                 DspScheme::LowPass}) {
    if (name == to_string(s)) return s;
  }
  fail(Errc::Config, "unknown dsp scheme: " + std::string(name));
}

void DspConfig::validate() const {
  require(w_smooth >= 1, Errc::InvalidParameter, "w_smooth must be >= 1");
  require(p1 >= w_smooth, Errc::InvalidParameter, "p1 must be >= w_smooth");
  for (double t : tau) require(t >= 0 && t <= 1, Errc::InvalidParameter, "tau must lie in [0,1]");
  require(lpf_cutoff > 0, Errc::InvalidParameter, "lpf_cutoff must be positive");
  require(lpf_window >= 2, Errc::InvalidParameter, "lpf_window must be >= 2");
}

std::vector<double> sequential_difference(std::span<const double> channel) {
  if (channel.size() < 2) fail(Errc::InsufficientData, "sequential difference needs at least 2 samples");
  std::vector<double> out(channel.size() - 1);
  for (std::size_t j = 1; j < channel.size(); ++j) out[j - 1] = std::abs(channel[j] - channel[j - 1]);
  return out;
}

std::array<std::vector<double>, kNumSensors> sequential_difference(const RawStream& stream) {
  std::array<std::vector<double>, kNumSensors> out;
  for (std::size_t s = 0; s < kNumSensors; ++s) out[s] = sequential_difference(stream.channel(s));
  return out;
}

ProcessedStream weighted_smoothed_difference(const RawStream& stream, const DspConfig& cfg) {
  DspConfig c = cfg;
  c.scheme = DspScheme::SequentialDifference;
  return run_conditioner(stream, c);
}

ProcessedStream weighted_smoothed_sum(const RawStream& stream, const DspConfig& cfg) {
  DspConfig c = cfg;
  c.scheme = DspScheme::WeightedSum;
  return run_conditioner(stream, c);
}

std::vector<double> pairwise_sensor_difference(const RawStream& stream, SensorId a, SensorId b) {
  if (a == b) fail(Errc::InvalidPair, "pairwise difference needs two distinct sensors");
  const auto& x = stream.channel(a);
  const auto& y = stream.channel(b);
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = std::abs(x[j] - y[j]);
  return out;
}

std::vector<std::pair<SensorId, SensorId>> sensor_pairs() {
  std::vector<std::pair<SensorId, SensorId>> out;
  for (int a = 1; a <= static_cast<int>(kNumSensors); ++a) {
    for (int b = a + 1; b <= static_cast<int>(kNumSensors); ++b) out.emplace_back(SensorId(a), SensorId(b));
  }
  return out;
}

std::size_t padded_size(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::complex<double>> fft_complex(std::span<const double> signal) {
  if (signal.empty()) fail(Errc::InsufficientData, "fft of an empty signal");
  return transform(padded_complex(signal), FFTW_FORWARD);
}

Spectrum fft(std::span<const double> signal, double sampling_rate) {
  require(sampling_rate > 0, Errc::InvalidParameter, "sampling rate must be positive");
  const auto full = fft_complex(signal);
  Spectrum spec;
  spec.padded_length = full.size();
  const std::size_t bins = full.size() / 2 + 1;
  spec.frequencies.resize(bins);
  spec.magnitudes.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    spec.frequencies[k] = static_cast<double>(k) * sampling_rate / static_cast<double>(full.size());
    spec.magnitudes[k] = std::abs(full[k]);
  }
  return spec;
}

std::vector<std::pair<double, double>> default_bands() {
  return {{1, 100}, {100, 200}, {200, 300}, {300, 400}, {400, 500}};
}

std::vector<BandStats> band_statistics(std::span<const double> signal, double sampling_rate,
                                       const std::vector<std::pair<double, double>>& bands) {
  require(sampling_rate > 0, Errc::InvalidParameter, "sampling rate must be positive");
  const double nyquist = sampling_rate / 2;
  for (const auto& [a, b] : bands) {
    if (!(a >= 0 && a < b && b <= nyquist)) {
      fail(Errc::InvalidBand, "band [" + std::to_string(a) + "," + std::to_string(b) + "] outside [0, " +
                                  std::to_string(nyquist) + "] Hz");
    }
  }
  const auto spectrum = fft_complex(signal);
  const std::size_t n = spectrum.size();
  std::vector<BandStats> out;
  out.reserve(bands.size());
  for (const auto& [a, b] : bands) {
    auto masked = spectrum;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t mirror = k <= n / 2 ? k : n - k;
      const double f = static_cast<double>(mirror) * sampling_rate / static_cast<double>(n);
      if (f < a || f > b) masked[k] = 0.0;
    }
    const auto band = inverse_real(std::move(masked), signal.size());
    double sum = 0, sq = 0;
    for (double v : band) sum += std::abs(v);
    const double mean = sum / static_cast<double>(band.size());
    for (double v : band) sq += (std::abs(v) - mean) * (std::abs(v) - mean);
    out.push_back({a, b, mean, std::sqrt(sq / static_cast<double>(band.size()))});
  }
  return out;
}

std::vector<double> low_pass(std::span<const double> signal, double sampling_rate, double cutoff) {
  require(sampling_rate > 0, Errc::InvalidParameter, "sampling rate must be positive");
  if (!(cutoff > 0 && cutoff < sampling_rate / 2)) {
    fail(Errc::InvalidParameter, "low-pass cutoff must lie in (0, Nyquist)");
  }
  auto spectrum = fft_complex(signal);
  const std::size_t n = spectrum.size();
  const auto keep = static_cast<std::size_t>(std::floor(cutoff * static_cast<double>(n) / sampling_rate + 0.5));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t mirror = k <= n / 2 ? k : n - k;
    if (mirror > keep) spectrum[k] = 0.0;
  }
  return inverse_real(std::move(spectrum), signal.size());
}

ChannelConditioner::ChannelConditioner(const DspConfig& cfg, double tau, double sampling_rate)
    : scheme_(cfg.scheme),
      tau_(tau),
      rate_(sampling_rate),
      cutoff_(cfg.lpf_cutoff),
      window_(cfg.scheme == DspScheme::LowPass ? cfg.lpf_window : cfg.w_smooth) {
  cfg.validate();
  require(scheme_ != DspScheme::PairwiseDifference, Errc::Config,
          "pairwise-diff yields six pair channels and cannot feed the per-sensor detector");
  if (scheme_ == DspScheme::LowPass && !(cutoff_ < rate_ / 2)) {
    fail(Errc::Config, "lpf_cutoff must be below the Nyquist frequency");
  }
}

void ChannelConditioner::reset() {
  prev_.reset();
  terms_.clear();
}

std::optional<double> ChannelConditioner::push(double x) {
  if (scheme_ == DspScheme::LowPass) {
    terms_.push_back(x);
    if (terms_.size() > window_) terms_.pop_front();
    if (terms_.size() < window_) return std::nullopt;
    std::vector<double> window(terms_.begin(), terms_.end());
    return low_pass(window, rate_, cutoff_).back();
  }

  if (!prev_) {
    prev_ = x;
    return std::nullopt;
  }
  const double term = scheme_ == DspScheme::SequentialDifference
                          ? 2.0 * std::abs(tau_ * x - (1.0 - tau_) * *prev_)
                          : tau_ * x + (1.0 - tau_) * *prev_;
  prev_ = x;
  terms_.push_back(term);
  if (terms_.size() > window_) terms_.pop_front();
  if (terms_.size() < window_) return std::nullopt;
  double sum = 0;
  for (double t : terms_) sum += t;
  return sum / static_cast<double>(window_);
}

StreamConditioner::StreamConditioner(const DspConfig& cfg, double sampling_rate)
    : channels_{ChannelConditioner(cfg, cfg.tau[0], sampling_rate), ChannelConditioner(cfg, cfg.tau[1], sampling_rate),
                ChannelConditioner(cfg, cfg.tau[2], sampling_rate), ChannelConditioner(cfg, cfg.tau[3], sampling_rate)},
      latency_(cfg.scheme == DspScheme::LowPass ? cfg.lpf_window - 1 : cfg.w_smooth) {}

std::optional<MultiSample> StreamConditioner::push(const MultiSample& raw) {
  MultiSample out;
  out.index = raw.index;
  bool ready = true;
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    auto v = channels_[s].push(raw.values[s]);
    if (v) {
      out.values[s] = *v;
    } else {
      ready = false;
    }
  }
  if (!ready) return std::nullopt;
  return out;
}

void StreamConditioner::reset() {
  for (auto& c : channels_) c.reset();
}

}  // namespace capstream
