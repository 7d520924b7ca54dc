#include "squashloc/detect.hpp"
#include "squashloc/localize.hpp"
#include "squashloc/mlp.hpp"
#include "squashloc/pipeline.hpp"
#include "squashloc/signal.hpp"
#include "squashloc/simulate.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace squashloc;

namespace {

const CourtGeometry kCourt = CourtGeometry::standard();
const MicArray kArray = MicArray::default_layout(kCourt);

void BM_Localize3d(benchmark::State& state) {
  auto rng = stream_rng(1, 0);
  std::vector<EventGroup> groups;
  NoiseSpec noise;
  noise.timestamp_sigma = static_cast<double>(state.range(0));
  for (std::uint64_t i = 0; i < 64; ++i) {
    noise.seed = i;
    SyntheticEvent e{random_point(kCourt, rng), 0.1, ClassLabel::racquet, 1.0};
    groups.push_back(perturb(forward_delays(e, kArray), noise));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(localize_3d(groups[i++ % groups.size()], kArray, kCourt));
    } catch (const NoSolutionError&) {
    }
  }
}
BENCHMARK(BM_Localize3d)->Arg(0)->Arg(10)->Arg(50);

void BM_Objective(benchmark::State& state) {
  SyntheticEvent e{Vec3(2, 3, 1), 0.1, ClassLabel::racquet, 1.0};
  const auto g = forward_delays(e, kArray);
  const TdoaProblem p(g, kArray);
  Vec3 x(1, 1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.objective(x));
    benchmark::DoNotOptimize(p.gradient(x));
  }
}
BENCHMARK(BM_Objective);

void BM_PowerSpectrum(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(power_spectrum(x, Taper::hann));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PowerSpectrum)->RangeMultiplier(4)->Range(64, 4096);

AudioBlock one_second(std::size_t channels) {
  NoiseSpec noise;
  noise.waveform_snr_db = 20.0;
  noise.seed = 3;
  auto rng = stream_rng(3, 0);
  std::vector<SyntheticEvent> events;
  for (int i = 0; i < 4; ++i) events.push_back(random_surface_event(kImpactClasses[i], kCourt, 0.3 + 0.15 * i, rng));
  MicArray array = kArray;
  array.mics.resize(channels);
  return synth_waveform(events, array, 96000, noise);
}

void BM_Detector(benchmark::State& state) {
  const auto audio = one_second(1);
  const auto method = state.range(0) ? DetectionMethod::surprise : DetectionMethod::gaussian_threshold;
  const auto params = state.range(0) ? DetectorParams::surprise_defaults() : DetectorParams::gaussian_defaults();
  for (auto _ : state) benchmark::DoNotOptimize(detect_channels(audio, method, params, Execution::serial));
  state.SetItemsProcessed(state.iterations() * 96000);
  state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_Detector)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Pipeline(benchmark::State& state) {
  const auto audio = one_second(6);
  const auto cfg = parse_config("{}");
  for (auto _ : state) benchmark::DoNotOptimize(run(cfg, audio, nullptr));
  state.SetItemsProcessed(state.iterations() * 96000);
}
BENCHMARK(BM_Pipeline)->Unit(benchmark::kMillisecond);

void BM_MlpPredict(benchmark::State& state) {
  const auto t1 = state.range(0) == 1;
  std::vector<std::size_t> sizes{t1 ? 601u : 300u};
  const auto& hidden = t1 ? kT1Architecture : kT2Architecture;
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  const auto model = MlpModel::initialized(sizes, 4);
  std::vector<double> x(sizes.front(), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
  state.SetLabel(t1 ? "T1 20x10" : "T2 10x10");
}
BENCHMARK(BM_MlpPredict)->Arg(1)->Arg(2);

}  // namespace

BENCHMARK_MAIN();
