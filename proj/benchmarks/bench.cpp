#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "drivatt/metrics.hpp"
#include "drivatt/models.hpp"
#include "drivatt/nn/autograd.hpp"
#include "drivatt/preprocess.hpp"
#include "drivatt/synth.hpp"

using namespace drivatt;

namespace {

AttentionMap random_map(int h, int w, std::mt19937_64& rng) {
  Grid g(h, w);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : g.cells()) v = u(rng);
  return AttentionMap::normalized(g);
}

nn::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
  nn::Tensor t(shape);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

static void BM_EmdSquare(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  const AttentionMap p = random_map(side, side, rng), q = random_map(side, side, rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::emd(p, q));
  state.SetLabel(std::to_string(side * side) + " cells");
}
BENCHMARK(BM_EmdSquare)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_ConvForwardBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  const nn::Var x = nn::constant(random_tensor({8, side, 2 * side}, rng));
  const nn::Var w = nn::parameter(random_tensor({8, 8, 3, 3}, rng));
  const nn::Var b = nn::parameter(random_tensor({8}, rng));
  for (auto _ : state) {
    const nn::Var y = nn::conv2d(x, w, b, 1, 1);
    nn::backward(nn::softmax_cross_entropy(nn::conv2d(y, w, b, 2, 1), nn::Tensor({8, side / 2, side}, 1.0 / (4.0 * side * side))));
    benchmark::DoNotOptimize(w->grad.data().data());
  }
}
BENCHMARK(BM_ConvForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_RasterizeAndSmooth(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<preprocess::GazePoint> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {u(rng), u(rng)};
  const preprocess::PreprocessConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(preprocess::rasterize_and_smooth(pts, cfg));
}
BENCHMARK(BM_RasterizeAndSmooth)->Arg(1)->Arg(12)->Arg(120)->Unit(benchmark::kMicrosecond);

static void BM_PredictFrame(benchmark::State& state) {
  models::ModelConfig cfg;
  cfg.kind = {models::ModelType::cond_conv, ConditionType::distraction};
  const models::AttentionModel model(cfg, 4);
  auto scfg = synth::SynthScenarioConfig::defaults(DriveMode::autopilot, ConditionType::distraction);
  scfg.frames_per_session = 1;
  const SessionRecord s = synth::generate_session(scfg, 0);
  const std::vector<DriverState> states{s.frames[0].state};
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(s.frames, states));
}
BENCHMARK(BM_PredictFrame)->Unit(benchmark::kMillisecond);

static void BM_SynthSession(benchmark::State& state) {
  auto cfg = synth::SynthScenarioConfig::defaults(DriveMode::manual, ConditionType::intention);
  cfg.frames_per_session = 64;
  cfg.with_scenes = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate_session(cfg, 0));
}
BENCHMARK(BM_SynthSession)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
