#include <fstream>

#include <gtest/gtest.h>

#include "capstream/error.hpp"
#include "capstream/recording_io.hpp"
#include "oracles.hpp"

using namespace capstream;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::Model;
}

}  // namespace

TEST(RecordingIo, StreamRoundTripIsExact) {
  oracle::TempDir dir("io");
  const auto s = generate_idle(3, 500, PhysicsParams{});
  write_stream_csv(dir / "a.csv", s);
  EXPECT_EQ(read_stream_csv(dir / "a.csv", s.sampling_rate()), s);
}

TEST(RecordingIo, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(4);
  for (double v : oracle::random_vector(rng, 1000, -1e6, 1e6)) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(RecordingIo, RecordingWithLabelsAndManifest) {
  oracle::TempDir dir("io");
  PhysicsParams p;
  p.sampling_rate = 53.0;
  const auto rec = generate_sequence(8, {2, 7}, p);
  const auto manifest = make_manifest(8, p);
  write_recording(dir / "seq.csv", rec, &manifest);
  EXPECT_TRUE(std::filesystem::exists(dir / "seq.labels.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "seq.manifest"));

  const auto back = read_recording(dir / "seq.csv");
  EXPECT_EQ(back.events, rec.events);
  EXPECT_EQ(back.stream, rec.stream);
  EXPECT_DOUBLE_EQ(back.stream.sampling_rate(), 53.0);
}

TEST(RecordingIo, ManifestRoundTripsPhysics) {
  PhysicsParams p;
  p.idle_sigma = 1.25;
  p.discharge = false;
  p.baseline[2] = 600;
  p.discharge_period = 900;
  const auto q = physics_from_config(KeyValueConfig::parse(make_manifest(1, p).to_string()));
  EXPECT_EQ(q.idle_sigma, 1.25);
  EXPECT_FALSE(q.discharge);
  EXPECT_EQ(q.baseline, p.baseline);
  EXPECT_EQ(q.discharge_period, 900);
}

TEST(RecordingIo, DatasetRoundTrip) {
  oracle::TempDir dir("io");
  PhysicsParams p;
  const auto ds = generate_dataset(2, 1, p);
  write_dataset(dir.path(), ds, make_manifest(2, p));
  const auto back = read_dataset(dir.path());
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back[i], ds[i]);
}

TEST(RecordingIo, MissingFilesAreIoErrors) {
  oracle::TempDir dir("io");
  EXPECT_EQ(code_of([&] { read_recording(dir / "none.csv"); }), Errc::Io);
  EXPECT_EQ(code_of([&] { read_dataset(dir / "nothing"); }), Errc::Io);
  EXPECT_EQ(code_of([&] { read_dataset(dir.path()); }), Errc::Io);
}

TEST(RecordingIo, MalformedCsvIsRejected) {
  oracle::TempDir dir("io");
  write_text(dir / "h.csv", "i,a,b\n1,2,3\n");
  EXPECT_EQ(code_of([&] { read_stream_csv(dir / "h.csv", 1.0); }), Errc::InvalidInput);
  write_text(dir / "f.csv", "index,s1,s2,s3,s4\n1,2,3,4\n");
  EXPECT_EQ(code_of([&] { read_stream_csv(dir / "f.csv", 1.0); }), Errc::InvalidInput);
  write_text(dir / "n.csv", "index,s1,s2,s3,s4\n1,2,x,4,5\n");
  EXPECT_EQ(code_of([&] { read_stream_csv(dir / "n.csv", 1.0); }), Errc::InvalidInput);
  write_text(dir / "o.csv", "index,s1,s2,s3,s4\n1,1,1,1,1\n3,1,1,1,1\n");
  EXPECT_EQ(code_of([&] { read_stream_csv(dir / "o.csv", 1.0); }), Errc::Ordering);
  write_text(dir / "l.labels.csv", "class,start\n");
  EXPECT_EQ(code_of([&] { read_labels_csv(dir / "l.labels.csv"); }), Errc::InvalidInput);
}

TEST(RecordingIo, CrlfInputIsAccepted) {
  oracle::TempDir dir("io");
  write_text(dir / "c.csv", "index,s1,s2,s3,s4\r\n5,1,2,3,4\r\n6,1.5,2,3,4\r\n");
  const auto s = read_stream_csv(dir / "c.csv", 10.0);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.first_index(), 5);
  EXPECT_EQ(s.channel(0)[1], 1.5);
}

TEST(KeyValueConfig, ParsesCommentsAndWhitespace) {
  const auto cfg = KeyValueConfig::parse("# comment\n\n detector.phi = 25 \nflag=true\nname=gru\n");
  EXPECT_EQ(cfg.get_double("detector.phi", 0), 25.0);
  EXPECT_TRUE(cfg.get_bool("flag", false));
  EXPECT_EQ(cfg.get_string("name", ""), "gru");
  EXPECT_EQ(cfg.get_int("missing", 7), 7);
}

TEST(KeyValueConfig, ReportsErrors) {
  EXPECT_EQ(code_of([] { KeyValueConfig::parse("novalue\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { KeyValueConfig::parse("=3\n"); }), Errc::Config);
  const auto cfg = KeyValueConfig::parse("a=abc\nb=1.5\nc=maybe\n");
  EXPECT_EQ(code_of([&] { cfg.get_double("a", 0); }), Errc::Config);
  EXPECT_EQ(code_of([&] { cfg.get_int("b", 0); }), Errc::Config);
  EXPECT_EQ(code_of([&] { cfg.get_bool("c", false); }), Errc::Config);
  EXPECT_EQ(code_of([] { KeyValueConfig::load("/nonexistent/cfg.txt"); }), Errc::Io);
}

TEST(KeyValueConfig, UnknownKeys) {
  const auto cfg = KeyValueConfig::parse("a=1\nb=2\nc=3\n");
  EXPECT_EQ(cfg.unknown_keys({"a", "c"}), std::vector<std::string>{"b"});
}
