#include <benchmark/benchmark.h>

#include <random>

#include "venus/graph_edit.hpp"
#include "venus/image.hpp"
#include "venus/metrics.hpp"
#include "venus/prompt_compiler.hpp"
#include "venus/toy_inversion.hpp"

namespace {

using namespace venus;

// chain of `n` relations "thingI near thingI+1"; target swaps every third predicate
std::pair<SceneGraph, SceneGraph> chain_pair(int n) {
  std::vector<ObjectNode> nodes;
  std::vector<RelationTriplet> src, tgt;
  for (int i = 0; i <= n; ++i) nodes.push_back({"n" + std::to_string(i), "thing" + std::to_string(i), {}});
  for (int i = 0; i < n; ++i) {
    const auto a = "n" + std::to_string(i), b = "n" + std::to_string(i + 1);
    src.push_back({a, "near", b});
    tgt.push_back({a, i % 3 == 0 ? "above" : "near", b});
  }
  return {SceneGraph::create(nodes, src), SceneGraph::create(nodes, tgt)};
}

void BM_SplitGraphs(benchmark::State& state) {
  const auto [src, tgt] = chain_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(split_graphs(src, tgt));
}
BENCHMARK(BM_SplitGraphs)->Arg(15)->Arg(100)->Arg(1000);

void BM_CompileBundle(benchmark::State& state) {
  const auto [src, tgt] = chain_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compile_bundle(src, tgt));
}
BENCHMARK(BM_CompileBundle)->Arg(15)->Arg(100);

ImageBuffer noise(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  ImageBuffer img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto a = noise(side, side, 1), b = noise(side, side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256)->Arg(512);

void BM_ToyInvertEdit(benchmark::State& state) {
  const auto d = toy::ToyDenoiser::random(toy::kDefaultDim, 1, state.range(0) == 0);
  const auto schedule = toy::NoiseSchedule::cosine();
  const auto z0 = toy::random_latent(toy::kDefaultDim, 2);
  for (auto _ : state) {
    const auto traj = toy::invert(d, schedule, z0, "horse standing on field", 7.5);
    benchmark::DoNotOptimize(toy::edit(d, schedule, traj, {7.5, "horse standing on field", "zebra standing on field"}));
  }
}
BENCHMARK(BM_ToyInvertEdit)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
