#include <benchmark/benchmark.h>

#include "capstream/classifier.hpp"
#include "capstream/detector.hpp"
#include "capstream/dsp.hpp"
#include "capstream/runtime.hpp"
#include "capstream/signal_model.hpp"

using namespace capstream;

namespace {

const RawStream& replay() {
  static const RawStream stream = [] {
    PhysicsParams p;
    p.sampling_rate = 53.0;
    std::vector<int> classes;
    for (int i = 0; i < 20; ++i) classes.push_back(i % kNumClasses + 1);
    return generate_sequence(1, classes, p).stream;
  }();
  return stream;
}

void BM_DspDetector(benchmark::State& state) {
  const auto& stream = replay();
  const DspConfig dsp;
  const auto det = DetectorConfig::for_rate(stream.sampling_rate());
  for (auto _ : state) {
    auto frames = detect_frames(stream, dsp, det);
    benchmark::DoNotOptimize(frames);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
  state.counters["samples/s/sensor"] =
      benchmark::Counter(static_cast<double>(stream.size()), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_DspDetector)->Unit(benchmark::kMillisecond);

void BM_Conditioner(benchmark::State& state) {
  const auto& stream = replay();
  for (auto _ : state) {
    auto p = condition(stream, DspConfig{});
    benchmark::DoNotOptimize(p);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_Conditioner)->Unit(benchmark::kMillisecond);

void BM_Fft(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 17) - 8.0;
  for (auto _ : state) {
    auto s = fft(x, 1000.0);
    benchmark::DoNotOptimize(s);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Fft)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_Forward(benchmark::State& state) {
  ModelSpec spec;
  spec.cell = state.range(0) == 0 ? CellType::GRU : CellType::LSTM;
  const Model m = Model::initialize(spec, 1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, spec.frame_length);
  for (auto _ : state) {
    auto p = forward(m, x);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->ArgNames({"lstm"})->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  ModelSpec spec;
  Model m = Model::initialize(spec, 1);
  std::vector<LabeledTensor> data(10);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i].tensor.values = Eigen::MatrixXd::Random(4, spec.frame_length);
    data[i].class_id = static_cast<int>(i) + 1;
  }
  std::vector<const LabeledTensor*> batch;
  for (const auto& d : data) batch.push_back(&d);
  for (auto _ : state) benchmark::DoNotOptimize(backward_and_update(m, batch, 1e-6));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
