#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>

#include "capstream/classifier.hpp"
#include "capstream/config.hpp"
#include "capstream/detector.hpp"
#include "capstream/dsp.hpp"
#include "capstream/error.hpp"
#include "capstream/metrics.hpp"
#include "capstream/net.hpp"
#include "capstream/protocol.hpp"
#include "capstream/recording_io.hpp"
#include "capstream/runtime.hpp"
#include "capstream/signal_model.hpp"

namespace fs = std::filesystem;
using namespace capstream;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Io: return kExitIo;
    case Errc::Config:
    case Errc::InvalidParameter:
    case Errc::InvalidBand:
    case Errc::InvalidPair:
    case Errc::InvalidWindow: return kExitConfig;
    default: return kExitFailure;
  }
}

// A flag that maps onto a module-prefixed config key. Values given on the
// command line replace those from --config.
class KeyFlags {
 public:
  void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help,
           const std::string& type, const std::string& default_text) {
    auto& f = *flags_.emplace_back(std::make_unique<Flag>());
    f.key = key;
    f.opt = app->add_option(name, f.value, help)->type_name(type)->default_str(default_text);
  }

  void add_switch(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    auto& f = *flags_.emplace_back(std::make_unique<Flag>());
    f.key = key;
    f.value = "true";
    f.opt = app->add_flag(name, help);
  }

  void apply(KeyValueConfig& cfg) const {
    for (const auto& f : flags_) {
      if (f->opt->count() > 0) cfg.set(f->key, f->value);
    }
  }

 private:
  struct Flag {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::vector<std::unique_ptr<Flag>> flags_;
};

struct Globals {
  std::uint64_t seed = 1;
  std::string config_path;
  CLI::Option* seed_opt = nullptr;
};

KeyValueConfig load_config(const Globals& g) {
  KeyValueConfig cfg;
  if (!g.config_path.empty()) {
    if (!fs::exists(g.config_path)) fail(Errc::Io, "config file not found: " + g.config_path);
    cfg = KeyValueConfig::load(g.config_path);
    const auto unknown = cfg.unknown_keys(known_config_keys());
    if (!unknown.empty()) fail(Errc::Config, "unknown config key: " + unknown.front());
  }
  return cfg;
}

std::uint64_t effective_seed(const Globals& g, const KeyValueConfig& cfg) {
  if (g.seed_opt->count() > 0) return g.seed;
  return static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(g.seed)));
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) fail(Errc::Io, "file not found: " + path);
}

void add_dsp_flags(CLI::App* app, KeyFlags& flags) {
  flags.add(app, "--scheme", "dsp.scheme",
            "conditioning scheme: sequential-diff, weighted-sum, pairwise-diff, low-pass (name)", "NAME",
            "sequential-diff");
  flags.add(app, "--tau", "dsp.tau", "sensitivity weight on the current sample, all sensors (ratio 0..1)", "FLOAT",
            "0.5");
  flags.add(app, "--w-smooth", "dsp.w_smooth", "smoothing window (samples)", "INT", "5");
  flags.add(app, "--lpf-cutoff", "dsp.lpf_cutoff", "low-pass cutoff (Hz)", "FLOAT", "50");
  flags.add(app, "--lpf-window", "dsp.lpf_window", "streaming low-pass window (samples)", "INT", "64");
}

void add_detector_flags(CLI::App* app, KeyFlags& flags) {
  flags.add(app, "--phi", "detector.phi", "threshold floor (V)", "FLOAT", "20");
  flags.add(app, "--p1", "detector.p1", "offset/threshold update period (samples)", "INT", "6 s x rate");
  flags.add(app, "--p-s", "detector.p_s", "padding before the upward crossing (samples)", "INT", "70");
  flags.add(app, "--p-e", "detector.p_e", "padding after the downward crossing (samples)", "INT", "70");
  flags.add(app, "--p-safe", "detector.p_safe", "samples above threshold before a safety recompute (samples)", "INT",
            "3 s x rate");
  flags.add(app, "--p-0a", "detector.p_0a", "initial offset window (samples)", "INT", "10 s x rate");
  flags.add(app, "--p-0b", "detector.p_0b", "warm-up before frames are recorded (samples)", "INT", "8 s x rate");
  flags.add(app, "--max-crossing-window", "detector.max_crossing_window",
            "longest accepted up/down crossing pair (samples)", "INT", "50");
  flags.add(app, "--merge-policy", "detector.merge_policy", "cross-sensor merge: union or last-sensor (name)",
            "NAME", "union");
  flags.add_switch(app, "--safety-adds-phi", "detector.safety_adds_phi",
                   "add phi to the safety-recomputed threshold (flag)");
}

double recording_rate(const std::string& path, const KeyValueConfig& cfg, const CLI::Option* rate_opt, double rate) {
  if (rate_opt && rate_opt->count() > 0) return rate;
  return sampling_rate_for(path, cfg.get_double("sampling_rate", 76.5));
}

void pipeline_configs(const KeyValueConfig& cfg, double rate, DspConfig& dsp, DetectorConfig& det) {
  det = DetectorConfig::for_rate(rate);
  apply_config(cfg, det);
  dsp = DspConfig{};
  dsp.p1 = det.p1;
  apply_config(cfg, dsp);
  dsp.validate();
  det.validate();
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) fail(Errc::Io, "cannot write " + path);
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string mode = "dataset";
  int classes = kNumClasses;
  int per_class = 100;
  double rate = 76.5;
  double gap = 6.0;
  double duration = 600.0;
  std::string out;
  CLI::Option* rate_opt = nullptr;
};

int cmd_simulate(const SimulateArgs& a, const Globals& g) {
  const KeyValueConfig cfg = load_config(g);
  const std::uint64_t seed = effective_seed(g, cfg);
  PhysicsParams params = physics_from_config(cfg);
  if (a.rate_opt->count() > 0 || !cfg.has("sampling_rate")) params.sampling_rate = a.rate;
  params.validate();
  require(a.classes >= 1 && a.classes <= kNumClasses, Errc::InvalidParameter, "--classes must be in [1,10]");
  require(a.per_class >= 1, Errc::InvalidParameter, "--per-class must be >= 1");
  const KeyValueConfig manifest = make_manifest(seed, params);

  if (a.mode == "dataset") {
    const auto recs = generate_dataset(seed, a.per_class, params, {}, a.classes);
    write_dataset(a.out, recs, manifest);
    std::cout << "wrote " << recs.size() << " recordings to " << a.out << "\n";
  } else if (a.mode == "sequence") {
    require(a.gap > 0, Errc::InvalidParameter, "--gap must be positive");
    std::vector<int> classes;
    for (int r = 0; r < a.per_class; ++r) {
      for (int c = 1; c <= a.classes; ++c) classes.push_back(c);
    }
    std::mt19937_64 rng(derive_seed(seed, 0x5e9));
    std::shuffle(classes.begin(), classes.end(), rng);
    const auto rec = generate_sequence(seed, classes, params, a.gap);
    write_recording(a.out, rec, &manifest);
    std::cout << "wrote " << rec.events.size() << " gestures (" << rec.stream.size() << " samples) to " << a.out
              << "\n";
  } else if (a.mode == "idle") {
    require(a.duration > 0, Errc::InvalidParameter, "--duration must be positive");
    LabeledRecording rec;
    rec.stream = generate_idle(seed, static_cast<std::int64_t>(std::llround(a.duration * params.sampling_rate)), params);
    write_recording(a.out, rec, &manifest);
    std::cout << "wrote " << rec.stream.size() << " idle samples to " << a.out << "\n";
  } else {
    fail(Errc::Config, "--mode must be dataset, sequence or idle");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- process

struct IoArgs {
  std::string input;
  std::string out;
  double rate = 76.5;
  CLI::Option* rate_opt = nullptr;
};

int cmd_process(const IoArgs& a, const KeyFlags& flags, const Globals& g) {
  KeyValueConfig cfg = load_config(g);
  flags.apply(cfg);
  require_file(a.input);
  const double rate = recording_rate(a.input, cfg, a.rate_opt, a.rate);
  const auto rec = read_recording(a.input, rate);
  DspConfig dsp;
  apply_config(cfg, dsp);
  dsp.validate();

  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;

  if (dsp.scheme == DspScheme::PairwiseDifference) {
    const auto pairs = sensor_pairs();
    std::vector<std::vector<double>> cols;
    out << "index";
    for (const auto& [x, y] : pairs) {
      out << ",d" << x.index() << y.index();
      cols.push_back(pairwise_sensor_difference(rec.stream, x, y));
    }
    out << "\n";
    for (std::size_t i = 0; i < rec.stream.size(); ++i) {
      out << rec.stream.first_index() + static_cast<SampleIndex>(i);
      for (const auto& c : cols) out << ',' << format_double(c[i]);
      out << "\n";
    }
  } else {
    const auto p = condition(rec.stream, dsp);
    out << "index,s1,s2,s3,s4\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      out << p.first_index + static_cast<SampleIndex>(i);
      for (const auto& c : p.channels) out << ',' << format_double(c[i]);
      out << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- fft

struct FftArgs {
  std::string input;
  std::string bands = "1:100,100:200,200:300,300:400,400:500";
  int sensor = 1;
  std::string spectrum;
  std::string csv;
  double rate = 76.5;
  CLI::Option* rate_opt = nullptr;
};

std::vector<std::pair<double, double>> parse_bands(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail(Errc::Config, "band must be low:high, got '" + item + "'");
    try {
      std::size_t used = 0;
      const double lo = std::stod(item.substr(0, colon), &used);
      const double hi = std::stod(item.substr(colon + 1));
      out.emplace_back(lo, hi);
    } catch (const std::logic_error&) {
      fail(Errc::Config, "band must be low:high, got '" + item + "'");
    }
  }
  if (out.empty()) fail(Errc::Config, "--bands is empty");
  return out;
}

int cmd_fft(const FftArgs& a, const Globals& g) {
  const KeyValueConfig cfg = load_config(g);
  require_file(a.input);
  const double rate = recording_rate(a.input, cfg, a.rate_opt, a.rate);
  const auto rec = read_recording(a.input, rate);
  const auto bands = parse_bands(a.bands);
  require(a.sensor >= 1 && a.sensor <= static_cast<int>(kNumSensors), Errc::InvalidParameter,
          "--sensor must be in [1,4]");

  std::array<std::vector<BandStats>, kNumSensors> stats;
  for (std::size_t s = 0; s < kNumSensors; ++s) stats[s] = band_statistics(rec.stream.channel(s), rate, bands);

  if (!a.spectrum.empty()) {
    auto out = open_output(a.spectrum);
    const auto spec = fft(rec.stream.channel(static_cast<std::size_t>(a.sensor - 1)), rate);
    out << "freq,magnitude\n";
    for (std::size_t k = 0; k < spec.frequencies.size(); ++k) {
      out << format_double(spec.frequencies[k]) << ',' << format_double(spec.magnitudes[k]) << "\n";
    }
  }
  if (!a.csv.empty()) {
    auto out = open_output(a.csv);
    out << "sensor,low,high,mean,stddev\n";
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      for (const auto& b : stats[s]) {
        out << s + 1 << ',' << format_double(b.low) << ',' << format_double(b.high) << ','
            << format_double(b.mean) << ',' << format_double(b.stddev) << "\n";
      }
    }
  }

  // Rows: statistic; columns: bands; cells: average over sensors (± spread).
  auto cell = [&](std::size_t band, bool sd) {
    double sum = 0, sq = 0;
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      const double v = sd ? stats[s][band].stddev : stats[s][band].mean;
      sum += v;
      sq += v * v;
    }
    const double mean = sum / kNumSensors;
    const double spread = std::sqrt(std::max(0.0, sq / kNumSensors - mean * mean));
    return fmt::format("{:.2f} (±{:.2f})", mean, spread);
  };
  std::cout << fmt::format("{:<10}", "statistic");
  for (const auto& [lo, hi] : bands) std::cout << fmt::format(" {:>18}", fmt::format("{:g}:{:g}", lo, hi));
  std::cout << "\n";
  for (const bool sd : {false, true}) {
    std::cout << fmt::format("{:<10}", sd ? "stddev" : "mean");
    for (std::size_t b = 0; b < bands.size(); ++b) std::cout << fmt::format(" {:>18}", cell(b, sd));
    std::cout << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- detect

int cmd_detect(const IoArgs& a, const KeyFlags& flags, const Globals& g) {
  KeyValueConfig cfg = load_config(g);
  flags.apply(cfg);
  require_file(a.input);
  const double rate = recording_rate(a.input, cfg, a.rate_opt, a.rate);
  DspConfig dsp;
  DetectorConfig det;
  pipeline_configs(cfg, rate, dsp, det);
  const auto rec = read_recording(a.input, rate);
  DetectorDiagnostics diag;
  const auto frames = detect_frames(rec.stream, dsp, det, &diag);

  auto write_index = [&](std::ostream& out) {
    out << "k,start,end\n";
    for (const auto& f : frames) out << f.k << ',' << f.start << ',' << f.end << "\n";
  };
  if (a.out.empty()) {
    write_index(std::cout);
  } else {
    auto index = open_output(a.out + ".index.csv");
    write_index(index);
    auto blocks = open_output(a.out + ".frames.csv");
    blocks << "k,index,s1,s2,s3,s4\n";
    for (const auto& f : frames) {
      for (std::size_t i = 0; i < f.length(); ++i) {
        blocks << f.k << ',' << f.start + static_cast<SampleIndex>(i);
        for (const auto& c : f.channels) blocks << ',' << format_double(c[i]);
        blocks << "\n";
      }
    }
  }
  std::cerr << fmt::format(
      "{} frames from {} samples at {:g} Hz (threshold updates {}, safety recomputes {}, discarded crossings {})\n",
      frames.size(), rec.stream.size(), rate, diag.threshold_updates, diag.safety_recomputes,
      diag.discarded_crossings);
  return kExitOk;
}

// ---------------------------------------------------------------- train / eval

struct TrainArgs {
  std::string data;
  std::string cell = "gru";
  std::string out;
  std::string history;
};

std::vector<LabeledTensor> load_examples(const std::string& dir, const KeyValueConfig& cfg, int frame_length) {
  if (!fs::is_directory(dir)) fail(Errc::Io, "dataset directory not found: " + dir);
  const auto recs = read_dataset(dir);
  if (recs.empty()) fail(Errc::InvalidInput, "dataset holds no recordings: " + dir);
  DspConfig dsp;
  DetectorConfig det;
  pipeline_configs(cfg, recs.front().stream.sampling_rate(), dsp, det);
  return labeled_tensors(recs, dsp, det, frame_length);
}

int cmd_train(const TrainArgs& a, const KeyFlags& flags, const Globals& g) {
  KeyValueConfig cfg = load_config(g);
  flags.apply(cfg);
  cfg.set("model.cell", a.cell);
  ModelSpec spec;
  apply_config(cfg, spec);
  spec.validate();
  TrainConfig tc;
  tc.seed = effective_seed(g, cfg);
  apply_config(cfg, tc);
  tc.validate();

  const auto data = load_examples(a.data, cfg, spec.frame_length);
  std::cout << fmt::format("training {} on {} frames ({} epochs, batch {}, lr {:g})\n", to_string(spec.cell),
                           data.size(), tc.epochs, tc.batch_size, tc.learning_rate);
  std::ofstream hist;
  if (!a.history.empty()) {
    hist = open_output(a.history);
    hist << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  }
  const auto result = train(data, spec, tc, [&](const EpochRecord& r) {
    std::cout << fmt::format("epoch {:>3}  loss {:.4f}  acc {:.4f}  val_loss {:.4f}  val_acc {:.4f}\n", r.epoch,
                             r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy)
              << std::flush;
    if (hist) {
      hist << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_accuracy) << ','
           << format_double(r.val_loss) << ',' << format_double(r.val_accuracy) << "\n";
    }
  });
  save_model(a.out, result.model, &tc);
  std::cout << "model written to " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string csv;
};

int cmd_eval(const EvalArgs& a, const Globals& g) {
  const KeyValueConfig cfg = load_config(g);
  require_file(a.model);
  const Model model = load_model(a.model);
  const auto data = load_examples(a.data, cfg, model.spec().frame_length);
  const EvalReport r = evaluate(model, data);

  std::cout << fmt::format("frames {}  accuracy {:.4f}  loss {:.4f}\n", r.total, r.accuracy, r.loss);
  std::cout << fmt::format("{:>5}  {:<15} {:>9} {:>9} {:>9} {:>8}\n", "class", "label", "precision", "recall", "f1",
                           "support");
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    std::cout << fmt::format("{:>5}  {:<15} {:>9.4f} {:>9.4f} {:>9.4f} {:>8}\n", c + 1,
                             gesture_label(static_cast<int>(c) + 1), m.precision, m.recall, m.f1, m.support);
  }
  std::cout << fmt::format("{:>5}  {:<15} {:>9.4f} {:>9.4f} {:>9.4f} {:>8}\n", "", "macro", r.macro_precision,
                           r.macro_recall, r.macro_f1, r.total);
  std::cout << "confusion (rows true, columns predicted)\n";
  for (const auto& row : r.confusion) {
    for (std::size_t v : row) std::cout << fmt::format("{:>5}", v);
    std::cout << "\n";
  }
  if (!a.csv.empty()) {
    auto out = open_output(a.csv);
    out << "class_id,label,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      const auto& m = r.per_class[c];
      out << c + 1 << ',' << gesture_label(static_cast<int>(c) + 1) << ',' << format_double(m.precision) << ','
          << format_double(m.recall) << ',' << format_double(m.f1) << ',' << m.support << "\n";
    }
    out << "macro,macro," << format_double(r.macro_precision) << ',' << format_double(r.macro_recall) << ','
        << format_double(r.macro_f1) << ',' << r.total << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval-detect

struct EvalDetectArgs {
  std::string frames;
  std::string labels;
  double iou_min = 0.8;
  std::string csv;
};

std::vector<Interval> read_frame_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot read " + path);
  std::vector<Interval> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || lineno == 1) continue;
    std::stringstream ss(line);
    std::string k, s, e;
    if (!std::getline(ss, k, ',') || !std::getline(ss, s, ',') || !std::getline(ss, e, ',')) {
      fail(Errc::InvalidInput, path + ":" + std::to_string(lineno) + ": expected k,start,end");
    }
    try {
      out.push_back({std::stoll(s), std::stoll(e)});
    } catch (const std::logic_error&) {
      fail(Errc::InvalidInput, path + ":" + std::to_string(lineno) + ": expected k,start,end");
    }
  }
  return out;
}

int cmd_eval_detect(const EvalDetectArgs& a, const Globals& g) {
  (void)load_config(g);
  require_file(a.frames);
  require_file(a.labels);
  const auto frames = read_frame_index(a.frames);
  const auto truth = event_intervals(read_labels_csv(a.labels));
  const auto d = detection_rate(frames, truth);
  const auto x = extraction_rate(frames, truth, a.iou_min);

  std::cout << fmt::format("events {}  frames {}\n", d.total_events, frames.size());
  std::cout << fmt::format("detection rate   {:.4f}  ({}/{})\n", d.detection_rate, d.detected_events,
                           d.total_events);
  std::cout << fmt::format("extraction rate  {:.4f}  ({}/{}; containment {}, iou>={:g} {})\n", x.extraction_rate,
                           x.correctly_framed, x.total_detected, x.contained, a.iou_min, x.iou_only);
  std::cout << fmt::format("iou mean {:.4f}  min {:.4f}\n", x.mean_iou, x.min_iou);
  if (!a.csv.empty()) {
    auto out = open_output(a.csv);
    out << "metric,value\n";
    out << "total_events," << d.total_events << "\n";
    out << "detected_events," << d.detected_events << "\n";
    out << "detection_rate," << format_double(d.detection_rate) << "\n";
    out << "total_detected," << x.total_detected << "\n";
    out << "correctly_framed," << x.correctly_framed << "\n";
    out << "correct_by_containment," << x.contained << "\n";
    out << "correct_by_iou_only," << x.iou_only << "\n";
    out << "iou_min," << format_double(x.iou_min) << "\n";
    out << "extraction_rate," << format_double(x.extraction_rate) << "\n";
    out << "mean_iou," << format_double(x.mean_iou) << "\n";
    out << "min_iou," << format_double(x.min_iou) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- run / consume

struct RunArgs {
  std::string source;
  std::string model;
  std::string socket = "127.0.0.1:7171";
  bool unpaced = false;
  bool no_socket = false;
  double rate = 76.5;
  CLI::Option* rate_opt = nullptr;
};

int cmd_run(const RunArgs& a, const KeyFlags& flags, const Globals& g) {
  KeyValueConfig cfg = load_config(g);
  flags.apply(cfg);
  const double live_rate = a.rate_opt->count() > 0 ? a.rate : cfg.get_double("stream.rate", a.rate);
  std::optional<Endpoint> endpoint;
  if (!a.no_socket) endpoint = parse_endpoint(a.socket);

  std::string path = a.source;
  if (path.rfind("file:", 0) == 0) path = path.substr(5);
  const bool is_file = a.source != "stdin" && a.source != "-" && a.source.rfind("tcp:", 0) != 0;
  if (is_file) require_file(path);
  const double rate = is_file ? sampling_rate_for(path, live_rate) : live_rate;

  PipelineConfig pc = PipelineConfig::from_config(cfg, rate);
  pc.model_path = a.model;
  pc.endpoint = endpoint;
  pc.pacing = a.unpaced ? Pacing::Unpaced : Pacing::Realtime;
  pc.validate();
  const Model model = load_model(pc.model_path);
  auto source = make_source(a.source, pc.pacing, live_rate);

  const auto summary = run_pipeline(*source, model, pc, [](const CommandMessage& m) {
    std::cout << serialize_message(m) << "\n" << std::flush;
  });
  std::cerr << fmt::format(
      "{}: {} samples, {} frames, {} messages ({} delivered, {} undelivered), latency mean {:.2f} ms max {:.2f} ms, "
      "{:.2f} s\n",
      summary.stop_reason, summary.samples, summary.frames, summary.messages, summary.delivered,
      summary.send_failures, summary.mean_latency_ms, summary.max_latency_ms, summary.elapsed_s);
  return kExitOk;
}

struct ConsumeArgs {
  std::string listen = "127.0.0.1:7171";
  std::string format = "text";
};

int cmd_consume(const ConsumeArgs& a, const Globals& g) {
  (void)load_config(g);
  if (a.format != "text" && a.format != "json") fail(Errc::Config, "--format must be text or json");
  const Endpoint ep = parse_endpoint(a.listen);
  Listener listener(ep);
  std::cerr << "listening on " << ep.host << ":" << listener.port() << std::endl;
  const bool json = a.format == "json";
  const auto summary = consume(
      listener,
      [json](const CommandMessage& m) {
        if (json) {
          std::cout << serialize_message(m) << "\n";
        } else {
          std::cout << fmt::format("frame {}: {} -> {} (p={:.3f}, t={} ms)\n", m.frame_index, m.label, m.command,
                                   m.probability, m.timestamp);
        }
        std::cout << std::flush;
      },
      [](const std::string& line, const std::string& error) {
        std::cerr << "skipped malformed message: " << error << " [" << line << "]\n";
      });
  std::cerr << fmt::format("stream closed: {} messages, {} malformed\n", summary.received, summary.malformed);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capstream: streaming capacitive hand-gesture detection and classification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.get_formatter()->column_width(44);

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "random seed for every seeded step (count)")->capture_default_str();
  app.add_option("--config", g.config_path, "key=value config file with module-prefixed keys (path)")
      ->default_str("none");

  // simulate
  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic recordings with ground-truth labels");
  simulate->add_option("--mode", sim.mode, "dataset (one gesture per file), sequence, or idle (name)")
      ->capture_default_str();
  simulate->add_option("--classes", sim.classes, "gesture classes 1..N to generate (count)")->capture_default_str();
  simulate->add_option("--per-class", sim.per_class, "recordings (dataset) or repeats (sequence) per class (count)")
      ->capture_default_str();
  sim.rate_opt = simulate->add_option("--rate", sim.rate, "sampling rate (Hz)")->capture_default_str();
  simulate->add_option("--gap", sim.gap, "idle time between gestures in sequence mode (s)")->capture_default_str();
  simulate->add_option("--duration", sim.duration, "length of an idle recording (s)")->capture_default_str();
  simulate->add_option("--out", sim.out, "output directory (dataset) or CSV file (path)")->required();

  // process
  IoArgs proc;
  KeyFlags proc_flags;
  auto* process = app.add_subcommand("process", "condition a recording and write the processed stream as CSV");
  process->add_option("input", proc.input, "recording CSV (path)")->required();
  process->add_option("--out", proc.out, "output CSV (path)")->default_str("stdout");
  proc.rate_opt = process->add_option("--rate", proc.rate, "sampling rate when no manifest exists (Hz)")
                      ->capture_default_str();
  add_dsp_flags(process, proc_flags);

  // fft
  FftArgs fa;
  auto* fftc = app.add_subcommand("fft", "spectrum and band statistics of a recording");
  fftc->add_option("input", fa.input, "recording CSV (path)")->required();
  fftc->add_option("--bands", fa.bands, "comma-separated low:high pass bands, 100 Hz wide by default (Hz)")
      ->default_str("1:100,...,400:500");
  fftc->add_option("--sensor", fa.sensor, "sensor whose spectrum is written (index 1..4)")->capture_default_str();
  fftc->add_option("--spectrum", fa.spectrum, "write freq,magnitude CSV here (path)")->default_str("none");
  fftc->add_option("--csv", fa.csv, "write per-sensor band statistics CSV here (path)")->default_str("none");
  fa.rate_opt = fftc->add_option("--rate", fa.rate, "sampling rate when no manifest exists (Hz)")
                    ->capture_default_str();

  // detect
  IoArgs det;
  KeyFlags det_flags;
  auto* detect = app.add_subcommand("detect", "run conditioning and gesture detection over a recording");
  detect->add_option("input", det.input, "recording CSV (path)")->required();
  detect->add_option("--out", det.out, "prefix for <out>.index.csv and <out>.frames.csv (path)")
      ->default_str("index to stdout");
  det.rate_opt = detect->add_option("--rate", det.rate, "sampling rate when no manifest exists (Hz)")
                     ->capture_default_str();
  add_dsp_flags(detect, det_flags);
  add_detector_flags(detect, det_flags);

  // train
  TrainArgs ta;
  KeyFlags train_flags;
  auto* trainc = app.add_subcommand("train", "train a recurrent classifier on a simulated dataset");
  trainc->add_option("--data", ta.data, "dataset directory (path)")->required();
  trainc->add_option("--cell", ta.cell, "recurrent cell: gru or lstm (name)")->capture_default_str();
  trainc->add_option("--out", ta.out, "model file to write (path)")->required();
  trainc->add_option("--history", ta.history, "per-epoch CSV (path)")->default_str("none");
  train_flags.add(trainc, "--epochs", "train.epochs", "passes over the training split (count)", "INT", "60");
  train_flags.add(trainc, "--batch-size", "train.batch_size", "examples per update (count)", "INT", "10");
  train_flags.add(trainc, "--lr", "train.learning_rate", "gradient-descent step size (ratio)", "FLOAT", "0.005");
  train_flags.add(trainc, "--val-fraction", "train.validation_fraction", "held-out share per class (ratio)", "FLOAT",
                  "0.2");
  train_flags.add(trainc, "--reduction", "train.reduction", "batch gradient: sum or mean (name)", "NAME", "sum");
  train_flags.add(trainc, "--hidden", "model.hidden", "recurrent units (count)", "INT", "20");
  train_flags.add(trainc, "--frame-length", "model.frame_length", "resampled frame length T (samples)", "INT", "64");

  // eval
  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "classification metrics of a model on a dataset");
  evalc->add_option("--model", ea.model, "model file (path)")->required();
  evalc->add_option("--data", ea.data, "dataset directory (path)")->required();
  evalc->add_option("--csv", ea.csv, "per-class metrics CSV (path)")->default_str("none");

  // eval-detect
  EvalDetectArgs eda;
  auto* eval_detect = app.add_subcommand("eval-detect", "detection and frame-extraction rates against labels");
  eval_detect->add_option("frames", eda.frames, "frame index CSV k,start,end (path)")->required();
  eval_detect->add_option("labels", eda.labels, "labels CSV class_id,true_start,true_end (path)")->required();
  eval_detect->add_option("--iou-min", eda.iou_min, "IoU for a frame that does not contain its event (ratio)")
      ->capture_default_str();
  eval_detect->add_option("--csv", eda.csv, "metrics CSV (path)")->default_str("none");

  // run
  RunArgs ra;
  KeyFlags run_flags;
  auto* run = app.add_subcommand("run", "stream a source through detection and classification, emit commands");
  run->add_option("--source", ra.source, "file:<csv>, stdin, or tcp:host:port (spec)")->required();
  run->add_option("--model", ra.model, "model file (path)")->required();
  run->add_option("--socket", ra.socket, "command sink endpoint (host:port)")->capture_default_str();
  run->add_flag("--unpaced", ra.unpaced, "replay files at full speed instead of the sampling rate (flag)");
  run->add_flag("--no-socket", ra.no_socket, "print messages only, no socket (flag)");
  ra.rate_opt = run->add_option("--rate", ra.rate, "sampling rate of live sources (Hz)")->capture_default_str();
  add_dsp_flags(run, run_flags);
  add_detector_flags(run, run_flags);

  // consume
  ConsumeArgs ca;
  auto* consumec = app.add_subcommand("consume", "listen for command messages and print them");
  consumec->add_option("--listen", ca.listen, "endpoint to listen on; port 0 picks a free port (host:port)")
      ->capture_default_str();
  consumec->add_option("--format", ca.format, "output: text or json (name)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim, g);
    if (*process) return cmd_process(proc, proc_flags, g);
    if (*fftc) return cmd_fft(fa, g);
    if (*detect) return cmd_detect(det, det_flags, g);
    if (*trainc) return cmd_train(ta, train_flags, g);
    if (*evalc) return cmd_eval(ea, g);
    if (*eval_detect) return cmd_eval_detect(eda, g);
    if (*run) return cmd_run(ra, run_flags, g);
    if (*consumec) return cmd_consume(ca, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
