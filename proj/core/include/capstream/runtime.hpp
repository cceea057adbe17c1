#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capstream/classifier.hpp"
#include "capstream/config.hpp"
#include "capstream/detector.hpp"
#include "capstream/dsp.hpp"
#include "capstream/net.hpp"
#include "capstream/protocol.hpp"
#include "capstream/signal_model.hpp"

namespace capstream {

/// FIFO with a fixed capacity. push() blocks while full, which throttles the
/// producer instead of dropping items.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  /// Returns false when the queue was closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    high_water_ = std::max(high_water_, items_.size());
    not_empty_.notify_one();
    return true;
  }

  /// Blocks until an item arrives; empty once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t high_water() const {
    std::lock_guard lock(mu_);
    return high_water_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
  std::deque<T> items_;
  std::size_t high_water_ = 0;
  bool closed_ = false;
};

enum class Pacing { Realtime, Unpaced };

class StreamSource {
 public:
  virtual ~StreamSource() = default;

  /// Next synchronous sample; empty at end of stream.
  virtual std::optional<MultiSample> next() = 0;
  virtual double sampling_rate() const = 0;
  virtual std::string describe() const = 0;
};

/// Replays a recording, optionally sleeping to hold the sampling rate.
class ReplaySource : public StreamSource {
 public:
  ReplaySource(RawStream stream, Pacing pacing, std::string name = "replay");

  std::optional<MultiSample> next() override;
  double sampling_rate() const override { return stream_.sampling_rate(); }
  std::string describe() const override { return name_; }

 private:
  RawStream stream_;
  Pacing pacing_;
  std::string name_;
  std::size_t pos_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// Live byte stream of ASCII lines `index,v1,v2,v3,v4`. A header line and
/// blank lines are skipped; any other malformed line is an input error.
std::optional<MultiSample> parse_sample_line(std::string_view line);

class LineSource : public StreamSource {
 public:
  LineSource(std::istream& in, double sampling_rate, std::string name = "stdin");

  std::optional<MultiSample> next() override;
  double sampling_rate() const override { return rate_; }
  std::string describe() const override { return name_; }

 private:
  std::istream& in_;
  double rate_;
  std::string name_;
  SampleIndex last_ = 0;
};

class TcpLineSource : public StreamSource {
 public:
  TcpLineSource(const Endpoint& ep, double sampling_rate);

  std::optional<MultiSample> next() override;
  double sampling_rate() const override { return rate_; }
  std::string describe() const override { return "tcp:" + ep_.to_string(); }

 private:
  Endpoint ep_;
  Socket sock_;
  double rate_;
  SampleIndex last_ = 0;
};

/// "file:<path>" (or a bare path), "stdin", or "tcp:host:port". Live sources
/// run at `live_rate`; file replays use the rate stored with the recording.
std::unique_ptr<StreamSource> make_source(std::string_view spec, Pacing pacing, double live_rate);

// Binding of key=value configs (module-prefixed keys) onto module configs.
std::vector<std::string> known_config_keys();
void apply_config(const KeyValueConfig& cfg, DspConfig& dsp);
void apply_config(const KeyValueConfig& cfg, DetectorConfig& det);
void apply_config(const KeyValueConfig& cfg, TrainConfig& train);
void apply_config(const KeyValueConfig& cfg, ModelSpec& spec);

struct PipelineConfig {
  DspConfig dsp;
  DetectorConfig detector;
  std::filesystem::path model_path;
  std::optional<Endpoint> endpoint;  // empty: no socket
  Pacing pacing = Pacing::Realtime;
  std::size_t max_send_attempts = 5;
  std::chrono::milliseconds initial_backoff{50};
  std::chrono::milliseconds max_backoff{1000};

  /// Defaults for `rate` Hz with overrides from `cfg`.
  static PipelineConfig from_config(const KeyValueConfig& cfg, double rate);

  /// Checks module configs, and that the model file exists and parses.
  void validate() const;
};

struct PipelineSummary {
  std::size_t samples = 0;
  std::size_t frames = 0;
  std::size_t messages = 0;
  std::size_t delivered = 0;       // messages written to the socket
  std::size_t send_failures = 0;   // messages given up after all attempts
  double max_latency_ms = 0;       // frame emission to message write
  double mean_latency_ms = 0;
  double elapsed_s = 0;
  std::string stop_reason;
  DetectorDiagnostics diagnostics;
};

using MessageObserver = std::function<void(const CommandMessage&)>;

/// Source -> dsp+detector -> classifier -> emitter, each stage on its own
/// thread. One message per detected frame, in frame order.
PipelineSummary run_pipeline(StreamSource& source, const Model& model, const PipelineConfig& cfg,
                             const MessageObserver& observer = {});

/// Streams a recording through the conditioner (any per-sensor scheme).
ProcessedStream condition(const RawStream& stream, const DspConfig& cfg);

/// Single-threaded dsp+detector pass over a whole recording.
std::vector<GestureFrame> detect_frames(const RawStream& stream, const DspConfig& dsp, const DetectorConfig& det,
                                        DetectorDiagnostics* diagnostics = nullptr);

/// Training examples from a labelled recording: for each event the detected
/// frame overlapping it most, else the event padded by p_s/p_e.
std::vector<LabeledTensor> labeled_tensors(const LabeledRecording& rec, const DspConfig& dsp,
                                           const DetectorConfig& det, int frame_length);
std::vector<LabeledTensor> labeled_tensors(const std::vector<LabeledRecording>& recs, const DspConfig& dsp,
                                           const DetectorConfig& det, int frame_length);

struct ConsumeSummary {
  std::size_t received = 0;
  std::size_t malformed = 0;
};

using ConsumeErrorObserver = std::function<void(const std::string& line, const std::string& error)>;

/// Accepts one connection and reads messages until the peer closes.
/// Malformed lines are reported and skipped.
ConsumeSummary consume(Listener& listener, const MessageObserver& on_message,
                       const ConsumeErrorObserver& on_error = {});

}  // namespace capstream
