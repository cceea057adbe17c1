#include "capstream/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "capstream/error.hpp"

namespace capstream {

namespace {

using Point = std::array<double, 2>;

struct Path {
  std::vector<Point> waypoints;
  bool vertical = false;  // UP/DOWN: hand over the centre, height varies
  bool receding = false;
};

// Planar gestures run from the named start side to the named end side,
// optionally turning at the grid centre.
Path path_for(int class_id, double half) {
  const Point left{-half, 0.0}, right{half, 0.0}, top{0.0, half}, bottom{0.0, -half}, centre{0.0, 0.0};
  switch (static_cast<GestureClass>(class_id)) {
    case GestureClass::LeftToRight: return {{left, right}};
    case GestureClass::RightToLeft: return {{right, left}};
    case GestureClass::Up: return {{centre}, true, true};
    case GestureClass::Down: return {{centre}, true, false};
    case GestureClass::DownToLeft: return {{bottom, centre, left}};
    case GestureClass::DownToRight: return {{bottom, centre, right}};
    case GestureClass::LeftToDown: return {{left, centre, bottom}};
    case GestureClass::RightToDown: return {{right, centre, bottom}};
    case GestureClass::UpToLeft: return {{top, centre, left}};
    case GestureClass::UpToRight: return {{top, centre, right}};
  }
  fail(Errc::InvalidParameter, "class_id must be in [1,10]");
}

Point point_along(const std::vector<Point>& pts, double u) {
  if (pts.size() == 1) return pts[0];
  std::vector<double> seg(pts.size() - 1);
  double total = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    seg[i] = std::hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]);
    total += seg[i];
  }
  double target = std::clamp(u, 0.0, 1.0) * total;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (target <= seg[i] || i + 1 == seg.size()) {
      double t = seg[i] > 0 ? std::min(target / seg[i], 1.0) : 0.0;
      return {pts[i][0] + t * (pts[i + 1][0] - pts[i][0]), pts[i][1] + t * (pts[i + 1][1] - pts[i][1])};
    }
    target -= seg[i];
  }
  return pts.back();
}

double tukey(double u, double alpha) {
  if (alpha <= 0) return 1.0;
  const double edge = alpha / 2;
  if (u < edge) return 0.5 * (1 - std::cos(std::numbers::pi * u / edge));
  if (u > 1 - edge) return 0.5 * (1 - std::cos(std::numbers::pi * (1 - u) / edge));
  return 1.0;
}

std::int64_t seconds_to_samples(double seconds, double rate) {
  return static_cast<std::int64_t>(std::llround(seconds * rate));
}

TrajectoryParams jittered(const TrajectoryParams& base, std::mt19937_64& rng) {
  TrajectoryParams m = base;
  if (!base.jitter) return m;
  std::uniform_real_distribution<double> height(0.85, 1.2), duration(0.8, 1.25), amplitude(0.85, 1.15),
      lateral(-0.004, 0.004);
  m.closest_height *= height(rng);
  m.duration *= duration(rng);
  m.amplitude_scale *= amplitude(rng);
  m.lateral_offset += lateral(rng);
  return m;
}

void add_trajectory(RawStream& stream, const GestureTrajectory& traj, std::size_t start) {
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    auto& ch = stream.mutable_channel(s);
    for (std::size_t k = 0; k < traj.profile[s].size(); ++k) ch.at(start + k) += traj.profile[s][k];
  }
}

}  // namespace

void PhysicsParams::validate() const {
  require(sampling_rate > 0, Errc::InvalidParameter, "sampling_rate must be positive");
  require(dielectric_constant > 0 && plate_area > 0 && coulomb_constant > 0, Errc::InvalidParameter,
          "dielectric constant, plate area and Coulomb constant must be positive");
  require(charge_q1 > 0 && charge_q2 > 0, Errc::InvalidParameter, "charges must be positive");
  require(min_distance > 0 && max_distance > min_distance, Errc::InvalidParameter,
          "distance range must satisfy 0 < min < max");
  require(plate_spacing > 0, Errc::InvalidParameter, "plate_spacing must be positive");
  require(discharge_period > 0, Errc::InvalidParameter, "discharge_period must be positive");
  require(capacity >= 0, Errc::InvalidParameter, "capacity must be non-negative");
  require(idle_sigma >= 0 && std::isfinite(idle_sigma), Errc::InvalidParameter,
          "idle_sigma must be non-negative");
}

double PhysicsParams::amplitude_at(double distance) const {
  const double d = std::clamp(distance, min_distance, max_distance);
  const double gain = coulomb_constant * charge_q1 * charge_q2 * plate_area / dielectric_constant;
  return gain * (1.0 / (d * d) - 1.0 / (max_distance * max_distance));
}

std::array<std::array<double, 2>, kNumSensors> plate_positions(const PhysicsParams& params) {
  const double h = params.plate_spacing / 2;
  return {{{-h, h}, {h, h}, {-h, -h}, {h, -h}}};
}

std::string_view gesture_label(int class_id) {
  switch (class_id) {
    case 1: return "Left to Right";
    case 2: return "Right to Left";
    case 3: return "UP";
    case 4: return "DOWN";
    case 5: return "Down to Left";
    case 6: return "Down to Right";
    case 7: return "Left to Down";
    case 8: return "Right to Down";
    case 9: return "Up to Left";
    case 10: return "Up to Right";
    default: fail(Errc::InvalidParameter, "class_id must be in [1,10]");
  }
}

void LabeledRecording::validate() const {
  SampleIndex prev_end = 0;
  const SampleIndex last = stream.first_index() + static_cast<SampleIndex>(stream.size()) - 1;
  for (const auto& e : events) {
    require(e.class_id >= 1 && e.class_id <= kNumClasses, Errc::InvalidInput, "event class out of range");
    require(e.true_start < e.true_end, Errc::InvalidInput, "event must satisfy start < end");
    require(e.true_start > prev_end, Errc::InvalidInput, "events must be sorted and non-overlapping");
    require(e.true_end <= last, Errc::InvalidInput, "event extends past the stream");
    prev_end = e.true_end;
  }
}

GestureTrajectory make_trajectory(int class_id, const PhysicsParams& params, const TrajectoryParams& motion) {
  params.validate();
  require(class_id >= 1 && class_id <= kNumClasses, Errc::InvalidParameter, "class_id must be in [1,10]");
  require(motion.duration > 0 && motion.closest_height > 0 && motion.amplitude_scale > 0,
          Errc::InvalidParameter, "trajectory duration, height and amplitude must be positive");

  const Path path = path_for(class_id, motion.sweep_half_length);
  const auto plates = plate_positions(params);

  GestureTrajectory traj;
  traj.class_id = class_id;
  traj.duration = std::max<std::int64_t>(seconds_to_samples(motion.duration, params.sampling_rate), 2);
  const auto n = static_cast<std::size_t>(traj.duration);
  for (auto& p : traj.profile) p.assign(n, 0.0);

  for (std::size_t k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    Point hand = point_along(path.waypoints, u);
    hand[0] += motion.lateral_offset;
    hand[1] += motion.lateral_offset;
    double height = motion.closest_height;
    if (path.vertical) {
      const double progress = path.receding ? u : 1.0 - u;
      height = motion.closest_height + (motion.far_height - motion.closest_height) * progress;
    }
    const double taper = tukey(u, motion.taper_fraction);
    for (std::size_t s = 0; s < kNumSensors; ++s) {
      const double dx = hand[0] - plates[s][0], dy = hand[1] - plates[s][1];
      const double d = std::sqrt(dx * dx + dy * dy + height * height);
      traj.profile[s][k] = motion.amplitude_scale * params.amplitude_at(d) * taper;
    }
  }
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    const auto& p = traj.profile[s];
    traj.peak_offsets[s] = std::distance(p.begin(), std::max_element(p.begin(), p.end()));
  }
  return traj;
}

RawStream generate_idle(std::uint64_t seed, std::int64_t length, const PhysicsParams& params) {
  params.validate();
  require(length > 0, Errc::InvalidParameter, "length must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> phase_dist(0, params.discharge_period - 1);

  std::array<std::vector<double>, kNumSensors> channels;
  std::array<std::int64_t, kNumSensors> phase{};
  for (std::size_t s = 0; s < kNumSensors; ++s) phase[s] = phase_dist(rng);

  const double per_sample = params.capacity / static_cast<double>(params.discharge_period);
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    auto& ch = channels[s];
    ch.resize(static_cast<std::size_t>(length));
    for (std::int64_t i = 0; i < length; ++i) {
      // Charge accumulates linearly and is shed (a drop of ~capacity) once per period.
      const double charge = params.discharge ? per_sample * static_cast<double>(phase[s]) : 0.0;
      const double n = params.idle_sigma > 0 ? params.idle_sigma * noise(rng) : 0.0;
      ch[static_cast<std::size_t>(i)] = params.baseline[s] + charge + n;
      if (++phase[s] == params.discharge_period) phase[s] = 0;
    }
  }
  return RawStream(params.sampling_rate, std::move(channels));
}

LabeledRecording generate_gesture(std::uint64_t seed, int class_id, const PhysicsParams& params,
                                  const TrajectoryParams& motion) {
  return generate_sequence(seed, {class_id}, params, 0.0, motion);
}

LabeledRecording generate_sequence(std::uint64_t seed, const std::vector<int>& classes,
                                   const PhysicsParams& params, double gap, const TrajectoryParams& motion) {
  params.validate();
  require(gap >= 0 && motion.pre_roll >= 0 && motion.post_roll >= 0, Errc::InvalidParameter,
          "idle spans must be non-negative");
  for (int c : classes) {
    require(c >= 1 && c <= kNumClasses, Errc::InvalidParameter, "class_id must be in [1,10]");
  }

  std::mt19937_64 rng(derive_seed(seed, 0x6a09e667));
  std::vector<GestureTrajectory> trajectories;
  trajectories.reserve(classes.size());
  for (int c : classes) trajectories.push_back(make_trajectory(c, params, jittered(motion, rng)));

  const std::int64_t pre = seconds_to_samples(motion.pre_roll, params.sampling_rate);
  const std::int64_t between = seconds_to_samples(gap, params.sampling_rate);
  const std::int64_t post = seconds_to_samples(motion.post_roll, params.sampling_rate);
  std::int64_t length = pre + post;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    length += trajectories[i].duration + (i + 1 < trajectories.size() ? between : 0);
  }
  length = std::max<std::int64_t>(length, 1);

  LabeledRecording rec;
  rec.stream = generate_idle(seed, length, params);
  std::int64_t cursor = pre;
  for (const auto& traj : trajectories) {
    add_trajectory(rec.stream, traj, static_cast<std::size_t>(cursor));
    const SampleIndex start = rec.stream.first_index() + cursor;
    rec.events.push_back({traj.class_id, start, start + traj.duration - 1});
    cursor += traj.duration + between;
  }
  return rec;
}

std::vector<LabeledRecording> generate_dataset(std::uint64_t seed, int n_per_class, const PhysicsParams& params,
                                               const TrajectoryParams& motion, int n_classes) {
  require(n_per_class > 0, Errc::InvalidParameter, "n_per_class must be positive");
  require(n_classes >= 1 && n_classes <= kNumClasses, Errc::InvalidParameter, "n_classes must be in [1,10]");
  std::vector<LabeledRecording> out;
  const auto total = static_cast<std::size_t>(n_per_class) * static_cast<std::size_t>(n_classes);
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const int class_id = static_cast<int>(i % static_cast<std::size_t>(n_classes)) + 1;
    out.push_back(generate_gesture(derive_seed(seed, i), class_id, params, motion));
  }
  return out;
}

void inject_contact(RawStream& stream, std::size_t channel, std::size_t start_position, std::size_t length,
                    double slope) {
  auto& ch = stream.mutable_channel(channel);
  require(start_position + length <= ch.size(), Errc::InvalidParameter, "contact surge exceeds stream");
  const std::size_t half = length / 2;
  double level = 0;
  for (std::size_t k = 0; k < length; ++k) {
    level += k < half ? slope : -slope;
    ch[start_position + k] += std::max(level, 0.0);
  }
}

std::vector<std::size_t> find_discharges(const std::vector<double>& channel, double capacity) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < channel.size(); ++i) {
    if (channel[i] - channel[i - 1] < -capacity / 2) out.push_back(i);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finaliser over the combined state
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace capstream
