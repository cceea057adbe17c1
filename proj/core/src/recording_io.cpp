#include "capstream/recording_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "capstream/error.hpp"

namespace capstream {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, const fs::path& path, std::size_t lineno) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(Errc::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_stream_csv(const fs::path& path, const RawStream& stream) {
  auto out = open_out(path);
  out << "index,s1,s2,s3,s4\n";
  for (std::size_t i = 0; i < stream.size(); ++i) {
    out << stream.first_index() + static_cast<SampleIndex>(i);
    for (std::size_t s = 0; s < kNumSensors; ++s) out << ',' << format_double(stream.channel(s)[i]);
    out << '\n';
  }
  if (!out) fail(Errc::Io, "write failed: " + path.string());
}

RawStream read_stream_csv(const fs::path& path, double sampling_rate) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "index,s1,s2,s3,s4") {
    fail(Errc::InvalidInput, path.string() + ": expected header index,s1,s2,s3,s4");
  }
  std::array<std::vector<double>, kNumSensors> channels;
  SampleIndex first = 1, prev = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != kNumSensors + 1) {
      fail(Errc::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    }
    const auto idx = parse_number<SampleIndex>(fields[0], path, lineno);
    if (channels[0].empty()) {
      first = idx;
    } else if (idx != prev + 1) {
      fail(Errc::Ordering, path.string() + ":" + std::to_string(lineno) + ": sample indices must be consecutive");
    }
    prev = idx;
    for (std::size_t s = 0; s < kNumSensors; ++s) channels[s].push_back(parse_number<double>(fields[s + 1], path, lineno));
  }
  return RawStream(sampling_rate, std::move(channels), first);
}

void write_labels_csv(const fs::path& path, const std::vector<GestureEvent>& events) {
  auto out = open_out(path);
  out << "class_id,true_start,true_end\n";
  for (const auto& e : events) out << e.class_id << ',' << e.true_start << ',' << e.true_end << '\n';
}

std::vector<GestureEvent> read_labels_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "class_id,true_start,true_end") {
    fail(Errc::InvalidInput, path.string() + ": expected header class_id,true_start,true_end");
  }
  std::vector<GestureEvent> events;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 3) fail(Errc::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    events.push_back({parse_number<int>(f[0], path, lineno), parse_number<SampleIndex>(f[1], path, lineno),
                      parse_number<SampleIndex>(f[2], path, lineno)});
  }
  return events;
}

fs::path labels_path_for(const fs::path& recording) {
  auto p = recording;
  p.replace_extension(".labels.csv");
  return p;
}

fs::path manifest_path_for(const fs::path& recording) {
  auto p = recording;
  p.replace_extension(".manifest");
  return p;
}

KeyValueConfig make_manifest(std::uint64_t seed, const PhysicsParams& p) {
  KeyValueConfig m;
  m.set("seed", std::to_string(seed));
  m.set("sampling_rate", format_double(p.sampling_rate));
  m.set("sim.dielectric_constant", format_double(p.dielectric_constant));
  m.set("sim.plate_area", format_double(p.plate_area));
  m.set("sim.coulomb_constant", format_double(p.coulomb_constant));
  m.set("sim.charge_q1", format_double(p.charge_q1));
  m.set("sim.charge_q2", format_double(p.charge_q2));
  m.set("sim.min_distance", format_double(p.min_distance));
  m.set("sim.max_distance", format_double(p.max_distance));
  m.set("sim.plate_spacing", format_double(p.plate_spacing));
  m.set("sim.discharge", p.discharge ? "true" : "false");
  m.set("sim.capacity", format_double(p.capacity));
  m.set("sim.discharge_period", std::to_string(p.discharge_period));
  m.set("sim.idle_sigma", format_double(p.idle_sigma));
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    m.set("sim.baseline" + std::to_string(s + 1), format_double(p.baseline[s]));
  }
  return m;
}

PhysicsParams physics_from_config(const KeyValueConfig& c, PhysicsParams p) {
  p.sampling_rate = c.get_double("sampling_rate", p.sampling_rate);
  p.dielectric_constant = c.get_double("sim.dielectric_constant", p.dielectric_constant);
  p.plate_area = c.get_double("sim.plate_area", p.plate_area);
  p.coulomb_constant = c.get_double("sim.coulomb_constant", p.coulomb_constant);
  p.charge_q1 = c.get_double("sim.charge_q1", p.charge_q1);
  p.charge_q2 = c.get_double("sim.charge_q2", p.charge_q2);
  p.min_distance = c.get_double("sim.min_distance", p.min_distance);
  p.max_distance = c.get_double("sim.max_distance", p.max_distance);
  p.plate_spacing = c.get_double("sim.plate_spacing", p.plate_spacing);
  p.discharge = c.get_bool("sim.discharge", p.discharge);
  p.capacity = c.get_double("sim.capacity", p.capacity);
  p.discharge_period = c.get_int("sim.discharge_period", p.discharge_period);
  p.idle_sigma = c.get_double("sim.idle_sigma", p.idle_sigma);
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    p.baseline[s] = c.get_double("sim.baseline" + std::to_string(s + 1), p.baseline[s]);
  }
  return p;
}

void write_recording(const fs::path& path, const LabeledRecording& rec, const KeyValueConfig* manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_stream_csv(path, rec.stream);
  write_labels_csv(labels_path_for(path), rec.events);
  if (manifest) manifest->save(manifest_path_for(path));
}

double sampling_rate_for(const fs::path& recording, double fallback_rate) {
  const auto own = manifest_path_for(recording);
  if (fs::exists(own)) return KeyValueConfig::load(own).get_double("sampling_rate", fallback_rate);
  const auto shared = recording.parent_path() / "manifest.txt";
  if (fs::exists(shared)) return KeyValueConfig::load(shared).get_double("sampling_rate", fallback_rate);
  return fallback_rate;
}

LabeledRecording read_recording(const fs::path& path, double fallback_rate) {
  if (!fs::exists(path)) fail(Errc::Io, "file not found: " + path.string());
  LabeledRecording rec;
  rec.stream = read_stream_csv(path, sampling_rate_for(path, fallback_rate));
  const auto labels = labels_path_for(path);
  if (fs::exists(labels)) rec.events = read_labels_csv(labels);
  rec.validate();
  return rec;
}

void write_dataset(const fs::path& dir, const std::vector<LabeledRecording>& recs, const KeyValueConfig& manifest) {
  fs::create_directories(dir);
  KeyValueConfig m = manifest;
  m.set("recordings", std::to_string(recs.size()));
  m.save(dir / "manifest.txt");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "rec_%04zu.csv", i);
    write_recording(dir / name, recs[i]);
  }
}

std::vector<LabeledRecording> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(Errc::Io, "dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(".csv") && !name.ends_with(".labels.csv")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(Errc::Io, "no recordings in " + dir.string());
  std::vector<LabeledRecording> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_recording(f));
  return out;
}

}  // namespace capstream
