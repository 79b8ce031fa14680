#include <benchmark/benchmark.h>

#include <vector>

#include "genplan/experiments.hpp"
#include "genplan/flow_train.hpp"
#include "genplan/mask_cache.hpp"
#include "genplan/mppi.hpp"
#include "genplan/planner.hpp"

namespace genplan {
namespace {

// Trained once per process; 150 epochs is enough for realistic sample shapes.
struct Artifacts {
  FlowModel model;
  InputGrid igrid{12};
  MaskCache cache;

  Artifacts() {
    Rng rng = make_rng(1, Stream::kData);
    std::vector<Vec4> data;
    for (const auto& p : synth_expert(rng)) data.push_back(p.to_array());
    TrainConfig tc;
    tc.epochs = 150;
    model = train_flow(data, tc);
    cache = build_cache(model, igrid, AtomicGrid{});
  }
};

const Artifacts& artifacts() {
  static const Artifacts a;
  return a;
}

const VehicleState kStart{-0.5, 0.0, 2.5, 0.0, 0.0};

World bench_world() {
  Rng rng = make_rng(1, Stream::kWorld);
  return gen_random_world(RandomWorldConfig{}, {kStart.x, kStart.y}, rng);
}

// Prior draw, flow pass, clamp and reconstruction: one end-to-end sample.
void BM_SamplePrimitive(benchmark::State& state) {
  const auto& a = artifacts();
  Rng rng(3);
  for (auto _ : state) {
    Vec4 z;
    for (auto& c : z) c = standard_normal(rng);
    benchmark::DoNotOptimize(reconstruct(to_primitive(a.model.forward(z).value), kReconstructSamples));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SamplePrimitive);

void BM_CacheQuery(benchmark::State& state) {
  const auto& a = artifacts();
  const World w = bench_world();
  for (auto _ : state) {
    const auto maps = decompose(w, kStart.pose(), a.cache.atomic_grid());
    benchmark::DoNotOptimize(rejected_cells(a.cache, maps));
  }
}
BENCHMARK(BM_CacheQuery);

void BM_PlanTick(benchmark::State& state) {
  const auto& a = artifacts();
  const World w = bench_world();
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(plan(kStart, w, a.model, a.cache, a.igrid, PlanConfig{}, rng));
}
BENCHMARK(BM_PlanTick)->Unit(benchmark::kMillisecond);

void BM_MppiStep(benchmark::State& state) {
  const World w = bench_world();
  MppiConfig cfg;
  const MppiState ms = MppiState::zeros(cfg);
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(mppi_step(kStart, w, ms, cfg, rng));
}
BENCHMARK(BM_MppiStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace genplan

BENCHMARK_MAIN();
