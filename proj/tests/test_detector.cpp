#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "capstream/detector.hpp"
#include "capstream/dsp.hpp"
#include "capstream/error.hpp"
#include "capstream/signal_model.hpp"
#include "oracles.hpp"

using namespace capstream;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::Model;
}

ProcessedStream flat_stream(std::size_t n, double level = 0.0) {
  ProcessedStream p;
  p.sampling_rate = 53.0;
  p.first_index = 1;
  for (auto& ch : p.channels) ch.assign(n, level);
  return p;
}

// Sets channel values at 1-based sample indices [from, to).
void raise(ProcessedStream& p, std::size_t sensor, SampleIndex from, SampleIndex to, double level) {
  for (SampleIndex j = from; j < to; ++j) p.channels[sensor][static_cast<std::size_t>(j - p.first_index)] = level;
}

DetectorConfig small_warmup() {
  DetectorConfig c;
  c.p_0a = 100;
  c.p_0b = 80;
  return c;
}

ProcessedStream process(const RawStream& s) { return weighted_smoothed_difference(s, DspConfig{}); }

bool overlaps(const GestureFrame& f, const GestureEvent& e) { return f.start <= e.true_end && e.true_start <= f.end; }

}  // namespace

TEST(InitializeOffsets, PrefixMeanAndFloor) {
  std::array<std::vector<double>, kNumSensors> prefix{
      std::vector<double>{1, 2, 3, 4}, {0, 0, 0, 0}, {10, 10, 10, 10}, {-2, 2, -2, 2}};
  const auto st = initialize_offsets(prefix, 4, 20.0);
  EXPECT_DOUBLE_EQ(st[0].lambda, 2.5);
  EXPECT_DOUBLE_EQ(st[1].lambda, 0.0);
  EXPECT_DOUBLE_EQ(st[2].lambda, 10.0);
  EXPECT_DOUBLE_EQ(st[3].lambda, 0.0);
  for (const auto& s : st) {
    EXPECT_EQ(s.delta, 20.0);
    EXPECT_FALSE(s.open());
    EXPECT_EQ(s.cnt, 0u);
  }
  EXPECT_EQ(code_of([&] { initialize_offsets(prefix, 5, 20.0); }), Errc::InsufficientData);
}

TEST(UpdateThreshold, Examples) {
  const std::vector<double> zeros(318, 0.0);
  EXPECT_DOUBLE_EQ(update_threshold(zeros, 0.0, 20.0, 318), 20.0);
  const std::vector<double> fives(318, 12.0);
  EXPECT_DOUBLE_EQ(update_threshold(fives, 7.0, 20.0, 318), 25.0);
  EXPECT_EQ(code_of([&] { update_threshold(zeros, 0.0, 20.0, 300); }), Errc::InvalidWindow);
}

TEST(UpdateThreshold, FloorPropertyOnIdleWindows) {
  PhysicsParams p;
  p.sampling_rate = 53.0;
  const auto idle = process(generate_idle(31, 20000, p));
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> start(0, idle.size() - 318);
  std::uniform_real_distribution<double> below(0.0, 3.0);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t s = trial % kNumSensors;
    const auto from = start(rng);
    const std::span<const double> w(idle.channels[s].data() + from, 318);
    const double m = oracle::mean(std::vector<double>(w.begin(), w.end()));
    const double lambda = trial % 10 == 0 ? m : m - below(rng);
    double direct = 0;
    for (double x : w) direct += x - lambda;
    if (direct < 0) continue;
    ++checked;
    EXPECT_GE(update_threshold(w, lambda, 20.0, 318), 20.0);
  }
  EXPECT_GE(checked, 900);
}

TEST(Detector, IdleThresholdsStayNearTheFloor) {
  PhysicsParams p;
  const auto stream = process(generate_idle(17, static_cast<std::int64_t>(60 * p.sampling_rate), p));
  Detector det(DetectorConfig::for_rate(p.sampling_rate));
  std::size_t seen_updates = 0;
  MultiSample m;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    m.index = stream.first_index + static_cast<SampleIndex>(i);
    for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = stream.channels[s][i];
    det.step(m);
    if (det.diagnostics().threshold_updates > seen_updates) {
      // The first update averages over a window that still straddles the init prefix.
      if (seen_updates >= kNumSensors) {
        for (std::size_t s = 0; s < kNumSensors; ++s) {
          EXPECT_GE(det.sensor(s).delta, 20.0 - 1e-9);
          EXPECT_LE(det.sensor(s).delta, 20.0 + 0.5 * p.idle_sigma);
        }
      }
      seen_updates = det.diagnostics().threshold_updates;
    }
  }
  EXPECT_GT(seen_updates, 4 * kNumSensors);
}

TEST(Detector, SinglePulseGivesShiftedFrame) {
  auto p = flat_stream(900);
  raise(p, 0, 500, 560, 100.0);
  DetectorConfig c = small_warmup();
  c.max_crossing_window = 60;  // the pulse is 60 samples wide
  Detector det(c);
  const auto frames = det.run(p);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].start, 430);
  EXPECT_EQ(frames[0].end, 630);
  EXPECT_EQ(frames[0].length(), 201u);
  EXPECT_EQ(frames[0].k, 1u);
  EXPECT_EQ(frames[0].channels[0][70], 100.0);
  EXPECT_EQ(frames[0].channels[0][69], 0.0);
}

TEST(Detector, PulseNearStartIsClamped) {
  auto p = flat_stream(400);
  raise(p, 1, 150, 170, 80.0);
  DetectorConfig c = small_warmup();
  c.p_s = 200;
  Detector det(c);
  const auto frames = det.run(p);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].start, 1);
  EXPECT_EQ(det.diagnostics().clamped_starts, 1u);
}

TEST(Detector, IdleMinuteEmitsNothing) {
  PhysicsParams p;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto stream = process(generate_idle(seed, static_cast<std::int64_t>(60 * p.sampling_rate), p));
    Detector det(DetectorConfig::for_rate(p.sampling_rate));
    EXPECT_TRUE(det.run(stream).empty());
  }
}

TEST(Detector, ContactSaturationTriggersRecomputeWithoutFrame) {
  auto p = flat_stream(2000);
  raise(p, 2, 600, 1100, 200.0);
  Detector det(small_warmup());
  EXPECT_TRUE(det.run(p).empty());
  EXPECT_GE(det.diagnostics().safety_recomputes, 1u);
}

TEST(Detector, SafetyThresholdOptionallyAddsFloor) {
  auto p = flat_stream(1000);
  raise(p, 0, 400, 700, 200.0);
  DetectorConfig c = small_warmup();
  c.p_safe = 50;
  Detector plain(c);
  c.safety_adds_phi = true;
  Detector floored(c);
  MultiSample m;
  for (SampleIndex j = 1; j <= 460; ++j) {
    m.index = j;
    for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = p.channels[s][static_cast<std::size_t>(j - 1)];
    plain.step(m);
    floored.step(m);
  }
  ASSERT_EQ(plain.diagnostics().safety_recomputes, 1u);
  EXPECT_NEAR(floored.sensor(0).delta - plain.sensor(0).delta, c.phi, 1e-9);
}

TEST(Detector, LongCrossingPairIsDiscarded) {
  auto p = flat_stream(1200);
  raise(p, 0, 500, 600, 100.0);  // 100 samples above: wider than the 50-sample window
  Detector det(small_warmup());
  EXPECT_TRUE(det.run(p).empty());
  EXPECT_EQ(det.diagnostics().discarded_crossings, 1u);
}

TEST(Detector, UnionMergeCoversAllSensors) {
  auto p = flat_stream(900);
  raise(p, 0, 500, 520, 100.0);
  raise(p, 2, 530, 560, 100.0);
  Detector det(small_warmup());
  const auto frames = det.run(p);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].start, 430);
  EXPECT_EQ(frames[0].end, 630);
}

TEST(Detector, LastSensorMergeLetsLastSensorWin) {
  auto p = flat_stream(900);
  raise(p, 0, 500, 520, 100.0);
  raise(p, 2, 530, 560, 100.0);
  DetectorConfig c = small_warmup();
  c.merge_policy = MergePolicy::LastSensor;
  Detector det(c);
  const auto frames = det.run(p);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].start, 430);
  EXPECT_EQ(frames[0].end, 590);
  EXPECT_EQ(frames[1].start, 460);
  EXPECT_EQ(frames[1].end, 630);
}

TEST(Detector, WarmupDropsEarlyFrames) {
  auto p = flat_stream(600);
  raise(p, 0, 120, 130, 100.0);
  DetectorConfig c = small_warmup();
  c.p_0b = 300;
  Detector det(c);
  EXPECT_TRUE(det.run(p).empty());
  EXPECT_EQ(det.diagnostics().warmup_drops, 1u);
}

TEST(Detector, DownwardWithoutStartIsIgnored) {
  // Start above threshold straight after initialisation: the first crossing is downward.
  auto p = flat_stream(600);
  raise(p, 3, 90, 110, 100.0);
  Detector det(small_warmup());
  EXPECT_TRUE(det.run(p).empty());
  EXPECT_EQ(det.diagnostics().ignored_downward, 1u);
}

TEST(Detector, OutOfOrderSampleIsRejected) {
  Detector det(small_warmup());
  MultiSample m;
  m.index = 5;
  det.step(m);
  m.index = 5;
  EXPECT_EQ(code_of([&] { det.step(m); }), Errc::Ordering);
  m.index = 3;
  EXPECT_EQ(code_of([&] { det.step(m); }), Errc::Ordering);
  m.index = 6;
  m.values[1] = std::nan("");
  EXPECT_EQ(code_of([&] { det.step(m); }), Errc::InvalidInput);
}

TEST(Detector, ConfigValidation) {
  DetectorConfig c;
  c.phi = 0;
  EXPECT_THROW(Detector{c}, Error);
  c = {};
  c.p1 = 0;
  EXPECT_THROW(c.validate(), Error);
  const auto r = DetectorConfig::for_rate(53.0);
  EXPECT_EQ(r.p1, 318u);
  EXPECT_EQ(r.p_0a, 530u);
  EXPECT_EQ(r.p_0b, 424u);
  EXPECT_EQ(r.p_safe, 159u);
  EXPECT_EQ(r.history_capacity(), 2u * (70 + 70 + 159 + 318));
  EXPECT_EQ(parse_merge_policy("last-sensor"), MergePolicy::LastSensor);
  EXPECT_EQ(code_of([] { parse_merge_policy("x"); }), Errc::Config);
}

TEST(ExtractFrame, SliceLengthAndOffsets) {
  ProcessedHistory h(1000);
  MultiSample m;
  for (SampleIndex j = 1; j <= 700; ++j) {
    m.index = j;
    m.values = {static_cast<double>(j), 1.0, 2.0, 3.0};
    h.push(m);
  }
  const auto f = extract_frame(h, 430, 630, {0, 0, 0, 0});
  EXPECT_EQ(f.length(), 201u);
  EXPECT_EQ(f.channels[0].front(), 430.0);
  EXPECT_EQ(f.channels[0].back(), 630.0);
  const auto g = extract_frame(h, 430, 630, {400, 1, 1, 1});
  EXPECT_EQ(g.channels[0].front(), 30.0);
  EXPECT_EQ(g.channels[1][17], 0.0);
  EXPECT_EQ(g.channels[3][17], 2.0);
  EXPECT_EQ(extract_frame(h, -20, 10, {}).start, 1);
  EXPECT_EQ(code_of([&] { extract_frame(h, 10, 10, {}); }), Errc::InvalidParameter);
  EXPECT_EQ(code_of([&] { extract_frame(h, 10, 800, {}); }), Errc::Capacity);
}

TEST(ExtractFrame, EvictedHistoryIsACapacityError) {
  ProcessedHistory h(100);
  MultiSample m;
  for (SampleIndex j = 1; j <= 500; ++j) {
    m.index = j;
    h.push(m);
  }
  EXPECT_EQ(h.oldest(), 401);
  EXPECT_EQ(code_of([&] { extract_frame(h, 350, 450, {}); }), Errc::Capacity);
  EXPECT_NO_THROW(extract_frame(h, 401, 500, {}));
}

TEST(ProcessedHistory, TrailingMean) {
  ProcessedHistory h(10);
  MultiSample m;
  for (SampleIndex j = 1; j <= 20; ++j) {
    m.index = j;
    m.values.fill(static_cast<double>(j));
    h.push(m);
  }
  EXPECT_DOUBLE_EQ(h.trailing_mean(2, 4), (20 + 19 + 18 + 17) / 4.0);
  EXPECT_DOUBLE_EQ(h.trailing_mean(0, 50), 15.5);
}

class GestureRecording : public ::testing::Test {
 protected:
  void SetUp() override {
    rec = generate_sequence(2024, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, physics);
    processed = process(rec.stream);
  }
  PhysicsParams physics;
  LabeledRecording rec;
  ProcessedStream processed;
};

TEST_F(GestureRecording, EachFrameOverlapsExactlyOneEvent) {
  Detector det(DetectorConfig::for_rate(physics.sampling_rate));
  const auto frames = det.run(processed);
  EXPECT_EQ(frames.size(), rec.events.size());
  for (const auto& f : frames) {
    const auto n = std::count_if(rec.events.begin(), rec.events.end(), [&](const auto& e) { return overlaps(f, e); });
    EXPECT_EQ(n, 1) << "frame [" << f.start << "," << f.end << "]";
  }
  for (std::size_t k = 0; k < frames.size(); ++k) EXPECT_EQ(frames[k].k, k + 1);
}

TEST_F(GestureRecording, FramesContainEventsUpToShiftSlack) {
  const auto cfg = DetectorConfig::for_rate(physics.sampling_rate);
  Detector det(cfg);
  const auto frames = det.run(processed);
  for (const auto& e : rec.events) {
    for (const auto& f : frames) {
      if (!overlaps(f, e)) continue;
      EXPECT_LE(f.start, e.true_start + static_cast<SampleIndex>(cfg.p_s));
      EXPECT_GE(f.end, e.true_end - static_cast<SampleIndex>(cfg.p_e));
    }
  }
}

TEST_F(GestureRecording, PreGestureMarginIsNearZero) {
  const auto cfg = DetectorConfig::for_rate(physics.sampling_rate);
  Detector det(cfg);
  for (const auto& f : det.run(processed)) {
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      const double m = oracle::mean(f.channels[s], 0, cfg.p_s);
      EXPECT_LE(std::abs(m), cfg.phi) << "frame " << f.k << " sensor " << s + 1;
    }
  }
}

TEST_F(GestureRecording, EveryFrameHasACrossingInItsCore) {
  const auto cfg = DetectorConfig::for_rate(physics.sampling_rate);
  Detector det(cfg);
  std::vector<SampleIndex> above;  // indices where some sensor exceeded its threshold
  std::vector<GestureFrame> frames;
  MultiSample m;
  for (std::size_t i = 0; i < processed.size(); ++i) {
    m.index = processed.first_index + static_cast<SampleIndex>(i);
    for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = processed.channels[s][i];
    if (det.initialized()) {
      for (std::size_t s = 0; s < kNumSensors; ++s) {
        if (m.values[s] - det.sensor(s).lambda > det.sensor(s).delta) {
          above.push_back(m.index);
          break;
        }
      }
    }
    if (auto f = det.step(m)) frames.push_back(std::move(*f));
  }
  ASSERT_FALSE(frames.empty());
  for (const auto& f : frames) {
    const auto lo = f.start + static_cast<SampleIndex>(cfg.p_s), hi = f.end - static_cast<SampleIndex>(cfg.p_e);
    EXPECT_TRUE(std::any_of(above.begin(), above.end(), [&](SampleIndex j) { return j >= lo && j <= hi; }));
  }
}

TEST_F(GestureRecording, OffsetsAndThresholdsFrozenWhileOpen) {
  Detector det(DetectorConfig::for_rate(physics.sampling_rate));
  MultiSample m;
  std::size_t open_steps = 0;
  for (std::size_t i = 0; i < processed.size(); ++i) {
    m.index = processed.first_index + static_cast<SampleIndex>(i);
    for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = processed.channels[s][i];
    std::array<SensorDetectorState, kNumSensors> before;
    for (std::size_t s = 0; s < kNumSensors; ++s) before[s] = det.sensor(s);
    const auto safety = det.diagnostics().safety_recomputes;
    det.step(m);
    if (!det.initialized() || det.diagnostics().safety_recomputes != safety) continue;
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      if (before[s].start == 0) continue;
      ++open_steps;
      ASSERT_EQ(det.sensor(s).lambda, before[s].lambda);
      ASSERT_EQ(det.sensor(s).delta, before[s].delta);
    }
  }
  EXPECT_GT(open_steps, 100u);
}

TEST_F(GestureRecording, ReplayIsDeterministic) {
  const auto cfg = DetectorConfig::for_rate(physics.sampling_rate);
  Detector a(cfg), b(cfg);
  const auto fa = a.run(processed), fb = b.run(processed);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t k = 0; k < fa.size(); ++k) {
    EXPECT_EQ(fa[k].start, fb[k].start);
    EXPECT_EQ(fa[k].end, fb[k].end);
    EXPECT_EQ(fa[k].channels, fb[k].channels);
  }
}

TEST(Detector, ZeroSettingCentresIdleOnOffsets) {
  // Bias check: averaged over many streams, (x - lambda) after initialisation is ~0.
  PhysicsParams p;
  const auto cfg = DetectorConfig::for_rate(p.sampling_rate);
  std::vector<double> offsets;
  double sigma = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto stream = process(generate_idle(100 + seed, static_cast<std::int64_t>(cfg.p_0a + 2000), p));
    Detector det(cfg);
    MultiSample m;
    std::size_t i = 0;
    for (; !det.initialized(); ++i) {
      m.index = stream.first_index + static_cast<SampleIndex>(i);
      for (std::size_t s = 0; s < kNumSensors; ++s) m.values[s] = stream.channels[s][i];
      det.step(m);
    }
    const std::vector<double> rest(stream.channels[0].begin() + static_cast<std::ptrdiff_t>(i), stream.channels[0].end());
    offsets.push_back(oracle::mean(rest) - det.sensor(0).lambda);
    sigma += oracle::stddev(rest) / 50;
  }
  EXPECT_LE(std::abs(oracle::mean(offsets)), 0.05 * sigma);
}
