#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

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
  return Errc::Io;
}

// Noise sigma from first differences, skipping the discharge drops.
double idle_sigma_estimate(const std::vector<double>& ch, double capacity) {
  std::vector<double> d;
  for (std::size_t i = 1; i < ch.size(); ++i) {
    const double diff = ch[i] - ch[i - 1];
    if (diff > -capacity / 2) d.push_back(diff);
  }
  return oracle::stddev(d) / std::sqrt(2.0);
}

std::size_t argmax_in(const std::vector<double>& ch, std::size_t from, std::size_t to) {
  return static_cast<std::size_t>(std::max_element(ch.begin() + from, ch.begin() + to + 1) - ch.begin());
}

}  // namespace

TEST(SensorId, AcceptsOneToFour) {
  for (int i = 1; i <= 4; ++i) EXPECT_EQ(SensorId(i).slot(), static_cast<std::size_t>(i - 1));
  EXPECT_THROW(SensorId(0), Error);
  EXPECT_THROW(SensorId(5), Error);
}

TEST(RawStream, RejectsUnequalChannelsAndBadRate) {
  EXPECT_THROW(RawStream(10.0, {std::vector<double>{1, 2}, {1}, {1, 2}, {1, 2}}), Error);
  EXPECT_THROW(RawStream(0.0, {std::vector<double>{1}, {1}, {1}, {1}}), Error);
  RawStream s(10.0, {std::vector<double>{1, 2}, {3, 4}, {5, 6}, {7, 8}}, 5);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.at(1).index, 6);
  EXPECT_EQ(s.at(1).values[2], 6.0);
}

TEST(GenerateIdle, NoiseSigmaMatchesParameter) {
  PhysicsParams p;
  const auto s = generate_idle(1, 10000, p);
  for (std::size_t c = 0; c < kNumSensors; ++c) {
    const double sigma = idle_sigma_estimate(s.channel(c), p.capacity);
    EXPECT_GE(sigma, 1.8) << "sensor " << c + 1;
    EXPECT_LE(sigma, 2.3) << "sensor " << c + 1;
  }
}

TEST(GenerateIdle, IdleStatisticsPropertyOverSeeds) {
  PhysicsParams p;
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    const auto s = generate_idle(seed, 6000, p);
    for (std::size_t c = 0; c < kNumSensors; ++c) {
      const double sigma = idle_sigma_estimate(s.channel(c), p.capacity);
      EXPECT_LE(std::abs(sigma - p.idle_sigma) / p.idle_sigma, 0.15) << "seed " << seed;
    }
  }
}

TEST(GenerateIdle, ChannelsSitAtTheirBaselines) {
  PhysicsParams p;
  const auto s = generate_idle(3, 1499 * 4, p);
  for (std::size_t c = 0; c < kNumSensors; ++c) {
    // Whole periods: noise mean ~0, sawtooth mean = capacity * (period-1) / (2 period).
    const double expected = p.baseline[c] + p.capacity * (p.discharge_period - 1) / (2.0 * p.discharge_period);
    EXPECT_NEAR(oracle::mean(s.channel(c)), expected, 0.2);
  }
}

TEST(GenerateIdle, ZeroNoiseWithoutDischargeIsConstant) {
  PhysicsParams p;
  p.idle_sigma = 0;
  p.discharge = false;
  const auto s = generate_idle(5, 500, p);
  for (std::size_t c = 0; c < kNumSensors; ++c) {
    for (double v : s.channel(c)) ASSERT_EQ(v, p.baseline[c]);
  }
}

TEST(GenerateIdle, RejectsBadLengthAndPeriod) {
  PhysicsParams p;
  EXPECT_EQ(code_of([&] { generate_idle(1, 0, p); }), Errc::InvalidParameter);
  EXPECT_EQ(code_of([&] { generate_idle(1, -5, p); }), Errc::InvalidParameter);
  p.discharge_period = 0;
  EXPECT_EQ(code_of([&] { generate_idle(1, 100, p); }), Errc::InvalidParameter);
}

TEST(GenerateIdle, DeterministicUnderSeed) {
  PhysicsParams p;
  EXPECT_EQ(generate_idle(42, 3000, p), generate_idle(42, 3000, p));
  EXPECT_FALSE(generate_idle(42, 3000, p) == generate_idle(43, 3000, p));
}

TEST(GenerateIdle, DischargeIntervalsEqualThePeriod) {
  PhysicsParams p;
  const auto s = generate_idle(9, 1499 * 8, p);
  for (std::size_t c = 0; c < kNumSensors; ++c) {
    const auto drops = find_discharges(s.channel(c), p.capacity);
    ASSERT_GE(drops.size(), 7u);
    for (std::size_t i = 1; i < drops.size(); ++i) {
      const auto gap = static_cast<std::int64_t>(drops[i] - drops[i - 1]);
      EXPECT_LE(std::abs(gap - p.discharge_period), 1) << "sensor " << c + 1;
    }
  }
}

TEST(GenerateIdle, PreDischargeDriftSpread) {
  // Sawtooth of height capacity: sigma = capacity / sqrt(12), about 11 V at 38 V.
  PhysicsParams p;
  p.idle_sigma = 0;
  const auto s = generate_idle(2, p.discharge_period * 6, p);
  for (std::size_t c = 0; c < kNumSensors; ++c) {
    EXPECT_NEAR(oracle::stddev(s.channel(c)), p.capacity / std::sqrt(12.0), 0.1);
  }
}

TEST(Physics, AmplitudeGrowsAsDistanceShrinks) {
  PhysicsParams p;
  for (double d : {0.1, 0.05, 0.03, 0.02, 0.01}) EXPECT_GT(p.amplitude_at(d / 2), p.amplitude_at(d));
  EXPECT_DOUBLE_EQ(p.amplitude_at(p.max_distance), 0.0);
  EXPECT_DOUBLE_EQ(p.amplitude_at(1.0), 0.0);
}

TEST(Physics, CloserApproachGivesHigherPeak) {
  PhysicsParams p;
  TrajectoryParams far, near;
  far.jitter = near.jitter = false;
  near.closest_height = far.closest_height / 2;
  const auto a = make_trajectory(1, p, far);
  const auto b = make_trajectory(1, p, near);
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    EXPECT_GT(*std::max_element(b.profile[s].begin(), b.profile[s].end()),
              *std::max_element(a.profile[s].begin(), a.profile[s].end()));
  }
}

TEST(GenerateGesture, RejectsUnknownClass) {
  PhysicsParams p;
  EXPECT_EQ(code_of([&] { generate_gesture(1, 0, p); }), Errc::InvalidParameter);
  EXPECT_EQ(code_of([&] { generate_gesture(1, 11, p); }), Errc::InvalidParameter);
}

TEST(GenerateGesture, LeftToRightPeaksLeftColumnFirst) {
  PhysicsParams p;
  const auto rec = generate_gesture(1, 1, p);
  ASSERT_EQ(rec.events.size(), 1u);
  const auto from = static_cast<std::size_t>(rec.events[0].true_start - rec.stream.first_index());
  const auto to = static_cast<std::size_t>(rec.events[0].true_end - rec.stream.first_index());
  const auto t1 = argmax_in(rec.stream.channel(0), from, to), t3 = argmax_in(rec.stream.channel(2), from, to);
  const auto t2 = argmax_in(rec.stream.channel(1), from, to), t4 = argmax_in(rec.stream.channel(3), from, to);
  EXPECT_LT(std::max(t1, t3), std::min(t2, t4));
}

// Directional signature: (earlier sensor, later sensor) per class, 1-based.
struct Ordering {
  int class_id;
  std::vector<int> early;
  std::vector<int> late;
};

TEST(GenerateGesture, DirectionalSignatureHoldsForEveryRecording) {
  PhysicsParams p;
  const std::vector<Ordering> cases = {
      {1, {1, 3}, {2, 4}}, {2, {2, 4}, {1, 3}}, {5, {4}, {1}},  {6, {3}, {2}},
      {7, {1}, {4}},       {8, {2}, {3}},       {9, {2}, {3}}, {10, {1}, {4}},
  };
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto rec = generate_gesture(1000 + seed, c.class_id, p);
      const auto from = static_cast<std::size_t>(rec.events[0].true_start - rec.stream.first_index());
      const auto to = static_cast<std::size_t>(rec.events[0].true_end - rec.stream.first_index());
      double early = 0, late = 0;
      for (int s : c.early) early += static_cast<double>(argmax_in(rec.stream.channel(s - 1), from, to));
      for (int s : c.late) late += static_cast<double>(argmax_in(rec.stream.channel(s - 1), from, to));
      early /= static_cast<double>(c.early.size());
      late /= static_cast<double>(c.late.size());
      ASSERT_LT(early, late) << "class " << c.class_id << " seed " << seed;
    }
  }
}

TEST(GenerateGesture, VerticalGesturesPeakTogether) {
  PhysicsParams p;
  for (int cls : {3, 4}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto rec = generate_gesture(seed, cls, p);
      const auto from = static_cast<std::size_t>(rec.events[0].true_start - rec.stream.first_index());
      const auto to = static_cast<std::size_t>(rec.events[0].true_end - rec.stream.first_index());
      std::vector<std::size_t> peaks;
      for (std::size_t s = 0; s < kNumSensors; ++s) peaks.push_back(argmax_in(rec.stream.channel(s), from, to));
      const auto [lo, hi] = std::minmax_element(peaks.begin(), peaks.end());
      EXPECT_LE(*hi - *lo, (to - from) / 5) << "class " << cls;

      // Envelope: summed deviation in the first vs the last third of the event.
      const auto idle = generate_idle(seed, static_cast<std::int64_t>(rec.stream.size()), p);
      const std::size_t third = (to - from + 1) / 3;
      double head = 0, tail = 0;
      for (std::size_t s = 0; s < kNumSensors; ++s) {
        for (std::size_t k = 0; k < third; ++k) {
          head += rec.stream.channel(s)[from + k] - idle.channel(s)[from + k];
          tail += rec.stream.channel(s)[to - k] - idle.channel(s)[to - k];
        }
      }
      if (cls == 3) {
        EXPECT_GT(head, tail) << "UP should decay, seed " << seed;
      } else {
        EXPECT_LT(head, tail) << "DOWN should grow, seed " << seed;
      }
    }
  }
}

TEST(GenerateGesture, GestureEnergyStaysInsideTheEvent) {
  PhysicsParams p;
  for (int cls = 1; cls <= kNumClasses; ++cls) {
    const auto rec = generate_gesture(77 + static_cast<std::uint64_t>(cls), cls, p);
    const auto idle = generate_idle(77 + static_cast<std::uint64_t>(cls), static_cast<std::int64_t>(rec.stream.size()), p);
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      for (std::size_t i = 0; i < rec.stream.size(); ++i) {
        const double dev = std::abs(rec.stream.channel(s)[i] - idle.channel(s)[i]);
        const auto index = rec.stream.first_index() + static_cast<SampleIndex>(i);
        if (dev > 3 * p.idle_sigma) {
          ASSERT_GE(index, rec.events[0].true_start);
          ASSERT_LE(index, rec.events[0].true_end);
        }
      }
    }
  }
}

TEST(GenerateGesture, EventsValidateAndAreDeterministic) {
  PhysicsParams p;
  const auto a = generate_sequence(4, {1, 5, 9, 3}, p);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.events.size(), 4u);
  for (std::size_t i = 1; i < a.events.size(); ++i) EXPECT_LT(a.events[i - 1].true_end, a.events[i].true_start);
  const auto b = generate_sequence(4, {1, 5, 9, 3}, p);
  EXPECT_EQ(a.stream, b.stream);
  EXPECT_EQ(a.events, b.events);
}

TEST(LabeledRecording, ValidateRejectsOverlapsAndOverruns) {
  LabeledRecording r;
  r.stream = generate_idle(1, 100, PhysicsParams{});
  r.events = {{1, 10, 20}, {2, 15, 30}};
  EXPECT_THROW(r.validate(), Error);
  r.events = {{1, 10, 200}};
  EXPECT_THROW(r.validate(), Error);
  r.events = {{1, 20, 20}};
  EXPECT_THROW(r.validate(), Error);
  r.events = {{1, 10, 20}, {3, 21, 100}};
  EXPECT_NO_THROW(r.validate());
}

TEST(GenerateDataset, BalancedAndDeterministic) {
  PhysicsParams p;
  const auto ds = generate_dataset(11, 100, p);
  ASSERT_EQ(ds.size(), 1000u);
  std::array<int, kNumClasses> counts{};
  for (const auto& r : ds) {
    ASSERT_EQ(r.events.size(), 1u);
    ++counts[static_cast<std::size_t>(r.events[0].class_id - 1)];
  }
  for (int c : counts) EXPECT_EQ(c, 100);

  EXPECT_EQ(generate_dataset(11, 1, p).size(), 10u);
  const auto again = generate_dataset(11, 2, p);
  const auto twice = generate_dataset(11, 2, p);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].events, twice[i].events);
    EXPECT_EQ(again[i].stream, twice[i].stream);
  }
  EXPECT_EQ(generate_dataset(11, 3, p, {}, 4).size(), 12u);
  EXPECT_THROW(generate_dataset(11, 0, p), Error);
}

TEST(InjectContact, AddsTriangleRamp) {
  PhysicsParams p;
  p.idle_sigma = 0;
  p.discharge = false;
  auto s = generate_idle(1, 100, p);
  inject_contact(s, 2, 10, 20, 5.0);
  EXPECT_DOUBLE_EQ(s.channel(2)[10] - p.baseline[2], 5.0);
  EXPECT_DOUBLE_EQ(s.channel(2)[19] - p.baseline[2], 50.0);
  EXPECT_NEAR(s.channel(2)[29] - p.baseline[2], 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.channel(1)[19], p.baseline[1]);
  EXPECT_THROW(inject_contact(s, 0, 90, 20, 1.0), Error);
}

TEST(DeriveSeed, ProducesDistinctStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(5, i));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(GestureLabel, MatchesClassTable) {
  EXPECT_EQ(gesture_label(1), "Left to Right");
  EXPECT_EQ(gesture_label(3), "UP");
  EXPECT_EQ(gesture_label(10), "Up to Right");
  EXPECT_THROW(gesture_label(0), Error);
}
