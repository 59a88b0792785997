#include <benchmark/benchmark.h>

#include "survey/baselines.hpp"
#include "survey/planner.hpp"
#include "survey/sensor.hpp"
#include "survey/svgp.hpp"

namespace {

using namespace survey;

TerrainGrid bench_terrain() {
  FeatureSpec spec;
  spec.base_depth = 20.0;
  spec.bumps.push_back({{60.0, 140.0}, -8.0, 22.0});
  spec.bumps.push_back({{150.0, 60.0}, -6.0, 18.0});
  spec.noise_amplitude = 0.2;
  spec.noise_lengthscale = 20.0;
  spec.seed = 3;
  return synth_terrain(spec, {0, 0}, 1.0, 201, 201);
}

SvgpModel bench_model(int u, Rng& rng) {
  return SvgpModel::init_grid({0, 0, 200, 200}, u, {6.25, 18.0}, 0.04, rng);
}

TrainBuffer bench_buffer(const TerrainGrid& grid, Rng& rng) {
  TrainBuffer buffer(100000);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (double y = 0; y <= 200; y += 2.0)
    for (double x = 0; x <= 200; x += 2.0)
      buffer.push({Vec2{x, y}, -depth_at(grid, x, y) + 0.05 * n01(rng), 0.01 * Mat2::Identity()});
  return buffer;
}

void BM_depth_at(benchmark::State& state) {
  const TerrainGrid grid = bench_terrain();
  double x = 13.7, y = 47.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(depth_at(grid, x, y));
    x = x < 180.0 ? x + 0.37 : 5.0;
    y = y < 180.0 ? y + 0.53 : 7.0;
  }
}
BENCHMARK(BM_depth_at);

void BM_simulate_ping(benchmark::State& state) {
  const TerrainGrid grid = bench_terrain();
  SensorConfig cfg;
  cfg.noise_q << 1e-4, 1e-4, 2.5e-3;
  cfg.ui_floor = 1e-3;
  Rng rng(1);
  PoseBelief believed{{100.0, 100.0, 0.4}, Mat3::Identity() * 0.01};
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_ping({100.0, 100.0, 0.4}, believed, grid, cfg, rng));
}
BENCHMARK(BM_simulate_ping);

void BM_dubins_shortest(benchmark::State& state) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  for (auto _ : state) {
    const Pose s = Pose::make(u(rng), u(rng), a(rng));
    const Pose e = Pose::make(u(rng), u(rng), a(rng));
    benchmark::DoNotOptimize(dubins_shortest(s, e, 10.0));
  }
}
BENCHMARK(BM_dubins_shortest);

void BM_train_step(benchmark::State& state) {
  const auto u = static_cast<int>(state.range(0));
  Rng rng(3);
  const TerrainGrid grid = bench_terrain();
  TrainBuffer buffer = bench_buffer(grid, rng);
  TrainConfig tc;
  tc.minibatch = 256;
  tc.learning_rate = 5e-3;
  tc.train_hyperparams = false;
  SvgpTrainer trainer(bench_model(u, rng), tc);
  trainer.add_beams_observed(buffer.size());
  for (auto _ : state) trainer.train_step(buffer, rng);
  state.SetComplexityN(u);
}
BENCHMARK(BM_train_step)->Arg(60)->Arg(120)->Arg(250)->Complexity();

void BM_predict_one(benchmark::State& state) {
  const auto u = static_cast<int>(state.range(0));
  Rng rng(4);
  const SvgpSnapshot snap(bench_model(u, rng));
  double x = 20.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(snap.predict_one({x, 90.0}));
    x = x < 180.0 ? x + 0.71 : 20.0;
  }
  state.SetComplexityN(u);
}
BENCHMARK(BM_predict_one)->Arg(60)->Arg(120)->Arg(250)->Complexity();

void BM_qucb(benchmark::State& state) {
  Rng rng(5);
  Eigen::VectorXd mus(3), sigs(3);
  mus << 0.5, 1.0, 1.5;
  sigs << 0.5, 1.0, 0.7;
  for (auto _ : state) benchmark::DoNotOptimize(qucb(mus, sigs, 100.0, 512, rng));
}
BENCHMARK(BM_qucb);

void BM_plan_cycle(benchmark::State& state) {
  Rng rng(6);
  const Extent extent{0, 0, 200, 200};
  auto snap = std::make_shared<SvgpSnapshot>(bench_model(120, rng));
  PlannerConfig cfg;
  cfg.horizon_radius = 45.0;
  cfg.tree_iterations = 12;
  cfg.fantasy_steps = 15;
  cfg.n_mc_qucb = 256;
  cfg.restarts = 5;
  cfg.path_value_samples = 512;
  TrainConfig tc;
  tc.minibatch = 128;
  const PoseBelief belief{{100.0, 100.0, 0.0}, Mat3::Identity() * 0.01};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        plan_next(snap, belief, extent, cfg, tc, rng, PlanBudget::iterations(12)));
}
BENCHMARK(BM_plan_cycle)->Unit(benchmark::kMillisecond);

void BM_lawnmower_path(benchmark::State& state) {
  const Extent area{0, 0, 300, 200};
  for (auto _ : state)
    benchmark::DoNotOptimize(lawnmower_path(area, 20.0, kPi / 2.0, 0.10, 10.0));
}
BENCHMARK(BM_lawnmower_path);

}  // namespace

BENCHMARK_MAIN();
