#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "capstream/types.hpp"

namespace capstream {

/// Physical knobs of the synthetic plate model. Charges and the dielectric
/// constant are effective calibration values chosen so that a hand at ~2 cm
/// produces a deviation of a few hundred volts (the ADC-scale range seen on
/// real plates), not SI-accurate quantities.
struct PhysicsParams {
  double sampling_rate = 76.5;        // Hz
  double dielectric_constant = 1.0;   // relative scale
  double plate_area = 0.0016;         // m^2
  double coulomb_constant = 8.9875517923e9;
  double charge_q1 = 1.865e-4;        // C (effective)
  double charge_q2 = 1.865e-4;        // C (effective)
  double min_distance = 0.001;        // m
  double max_distance = 0.15;         // m, beyond this the plate sees nothing
  double plate_spacing = 0.04;        // m, centre-to-centre on the 2x2 grid
  bool discharge = true;
  double capacity = 38.0;             // V, charge shed at each discharge
  std::int64_t discharge_period = 1499;  // samples
  double idle_sigma = 2.03;           // V
  std::array<double, kNumSensors> baseline{512.0, 471.0, 538.0, 455.0};  // V

  void validate() const;

  /// Deviation seen by a plate when the hand is at distance d (metres).
  /// Follows k_e q1 q2 A / (eps d^2), offset so that it reaches zero at max_distance.
  double amplitude_at(double distance) const;
};

/// Plate centres (metres) on the 2x2 grid, x to the right and y up.
std::array<std::array<double, 2>, kNumSensors> plate_positions(const PhysicsParams& params);

/// Gesture classes.
enum class GestureClass : int {
  LeftToRight = 1,
  RightToLeft = 2,
  Up = 3,
  Down = 4,
  DownToLeft = 5,
  DownToRight = 6,
  LeftToDown = 7,
  RightToDown = 8,
  UpToLeft = 9,
  UpToRight = 10,
};

std::string_view gesture_label(int class_id);

/// Hand-motion knobs for one gesture. When `jitter` is set, generate_gesture
/// perturbs height, duration, amplitude, and lateral offset from its seed.
struct TrajectoryParams {
  double closest_height = 0.018;   // m above the plate plane at closest approach
  double far_height = 0.09;        // m, far end of vertical (UP/DOWN) motion
  double duration = 0.85;          // s
  double sweep_half_length = 0.06; // m, planar path extent from the grid centre
  double amplitude_scale = 1.0;
  double lateral_offset = 0.0;     // m, perpendicular shift of the path
  double taper_fraction = 0.3;     // Tukey taper of the hand entering/leaving
  double pre_roll = 12.0;          // s of idle before the gesture
  double post_roll = 3.0;          // s of idle after the gesture
  bool jitter = true;
};

/// Noise-free per-plate deviation caused by one gesture.
struct GestureTrajectory {
  int class_id = 1;
  std::int64_t duration = 0;                                  // samples
  std::array<std::int64_t, kNumSensors> peak_offsets{};       // samples from gesture start
  std::array<std::vector<double>, kNumSensors> profile{};     // V, length == duration
};

struct GestureEvent {
  int class_id = 1;
  SampleIndex true_start = 0;
  SampleIndex true_end = 0;

  friend bool operator==(const GestureEvent&, const GestureEvent&) = default;
};

struct LabeledRecording {
  RawStream stream;
  std::vector<GestureEvent> events;

  void validate() const;
  friend bool operator==(const LabeledRecording&, const LabeledRecording&) = default;
};

GestureTrajectory make_trajectory(int class_id, const PhysicsParams& params,
                                  const TrajectoryParams& motion);

RawStream generate_idle(std::uint64_t seed, std::int64_t length, const PhysicsParams& params);

/// Idle background with one gesture after `motion.pre_roll` seconds.
LabeledRecording generate_gesture(std::uint64_t seed, int class_id, const PhysicsParams& params,
                                  const TrajectoryParams& motion = {});

/// n_per_class single-gesture recordings for each of classes 1..n_classes,
/// interleaved (recording i has class i % n_classes + 1).
std::vector<LabeledRecording> generate_dataset(std::uint64_t seed, int n_per_class,
                                               const PhysicsParams& params,
                                               const TrajectoryParams& motion = {},
                                               int n_classes = kNumClasses);

/// One continuous recording holding the given gestures in order, separated by
/// `gap` seconds of idle. The first gesture starts after motion.pre_roll.
LabeledRecording generate_sequence(std::uint64_t seed, const std::vector<int>& classes,
                                   const PhysicsParams& params, double gap = 6.0,
                                   const TrajectoryParams& motion = {});

/// Adds a contact-like surge to `channel`: the value climbs by `slope` volts per
/// sample for half of `length` samples and falls back at the same rate.
void inject_contact(RawStream& stream, std::size_t channel, std::size_t start_position,
                    std::size_t length, double slope);

/// Positions (0-based) where a discharge drop happened on a channel of an idle
/// stream, found as first differences below -capacity/2.
std::vector<std::size_t> find_discharges(const std::vector<double>& channel, double capacity);

/// Derives an independent stream seed for item `index` of a seeded batch.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace capstream
