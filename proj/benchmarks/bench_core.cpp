#include <benchmark/benchmark.h>

#include "advxfer/imaging.hpp"
#include "advxfer/metrics.hpp"
#include "advxfer/nes.hpp"
#include "advxfer/random.hpp"

using namespace advxfer;

static void BM_Composite(benchmark::State& state) {
  const Frame frame = Frame::blank(640, 360, 80, 90, 100);
  const Patch patch = create_patch(32, 32, 1);
  const int side = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(composite(frame, patch, {300, 100, side, side}));
  }
}
BENCHMARK(BM_Composite)->Arg(16)->Arg(64)->Arg(128);

static void BM_EstimateGradient(benchmark::State& state) {
  const Patch patch = create_patch(16, 16, 2);
  NesConfig config;
  const auto objective = [](const Patch& p, std::uint64_t) {
    double s = 0.0;
    for (double v : p.values()) s += v * v;
    return s;
  };
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_gradient(objective, patch, config, ++seed));
  }
}
BENCHMARK(BM_EstimateGradient);

static void BM_FrameAsr(benchmark::State& state) {
  Rng rng(3);
  std::vector<TrialLog> logs(static_cast<std::size_t>(state.range(0)));
  for (std::size_t k = 0; k < logs.size(); ++k) {
    logs[k].trial_id = std::to_string(k);
    logs[k].oracle_id = "m";
    logs[k].scenario_id = "s";
    logs[k].target_action = ActionLabel::kAccelerate;
    for (int f = 0; f < 10; ++f) {
      const bool hit = rng.uniform01() < 0.7;
      logs[k].frames.push_back({0.5 * f, 30.0 - f,
                                hit ? ActionLabel::kAccelerate : ActionLabel::kBrake, hit, "x"});
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(frame_asr(logs));
}
BENCHMARK(BM_FrameAsr)->Arg(5)->Arg(500);
BENCHMARK_MAIN();
