// Parallel kernels against their serial references on default-size inputs.

#include <benchmark/benchmark.h>

#include "vastree/baseline.hpp"
#include "vastree/metrics.hpp"
#include "vastree/prompt.hpp"
#include "vastree/render.hpp"
#include "vastree/rng.hpp"
#include "vastree/ssagen.hpp"

using namespace vastree;

namespace {

const Tree& sample_tree() {
  static const Tree t = [] {
    ssagen::GrowthConfig g;
    g.seed = 1;
    return ssagen::grow_tree(g);
  }();
  return t;
}

const ImageGrid& sample_mask() {
  static const ImageGrid m = baseline::make_mask(sample_tree(), render::RenderConfig{});
  return m;
}

metrics::PointSet cloud(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  metrics::PointSet s(n);
  for (auto& p : s) p = {rng.uniform(0, 250), rng.uniform(0, 250)};
  return s;
}

template <auto Fn>
void BM_distance_transform(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(sample_mask()));
}

template <auto Fn>
void BM_nearest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = cloud(1, n), b = cloud(2, n);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
}

template <auto Fn>
void BM_prompt(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(WorldPoint{0.4, 0.6}, 250, 250, prompt::kDefaultAlpha));
}

template <auto Fn>
void BM_render(benchmark::State& state) {
  const render::RenderConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(sample_tree(), cfg));
}

template <auto Fn>
void BM_perlin(benchmark::State& state) {
  const render::RenderConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(cfg));
}

}  // namespace

BENCHMARK(BM_distance_transform<baseline::distance_transform>)->Name("distance_transform/parallel");
BENCHMARK(BM_distance_transform<baseline::distance_transform_serial>)->Name("distance_transform/serial");
BENCHMARK(BM_nearest<metrics::nearest_sq>)->Name("nearest_sq/parallel")->Arg(1000)->Arg(10000);
BENCHMARK(BM_nearest<metrics::nearest_sq_serial>)->Name("nearest_sq/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_prompt<prompt::prompt_channel>)->Name("prompt_channel/parallel");
BENCHMARK(BM_prompt<prompt::prompt_channel_serial>)->Name("prompt_channel/serial");
BENCHMARK(BM_render<render::render_tree>)->Name("render_tree/parallel");
BENCHMARK(BM_render<render::render_tree_serial>)->Name("render_tree/serial");
BENCHMARK(BM_perlin<render::perlin_field>)->Name("perlin_field/parallel");
BENCHMARK(BM_perlin<render::perlin_field_serial>)->Name("perlin_field/serial");

BENCHMARK_MAIN();
