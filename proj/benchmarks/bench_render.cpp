#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hdrgs/losses.hpp"
#include "hdrgs/model.hpp"
#include "hdrgs/rasterizer.hpp"
#include "hdrgs/tone_mapping.hpp"
#include "test_util.hpp"

namespace hdrgs {
namespace {

struct Fixture {
  Camera cam;
  std::vector<Gaussian3D> scene;
  ImageD upstream;

  Fixture(int size, int count) : cam(testing::axis_camera(size, size, size)) {
    std::mt19937_64 rng(42);
    scene = testing::random_scene(rng, count, cam);
    upstream = testing::random_image(rng, size, size, -1.0, 1.0);
  }
};

void BM_RenderForward(benchmark::State& state) {
  const Fixture fx(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(render_irradiance(fx.scene, fx.cam));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_RenderForward)->Args({64, 300})->Args({128, 1000})->Args({256, 5000})->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const Fixture fx(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const RenderOutput fwd = render_irradiance(fx.scene, fx.cam);
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(fx.scene, fx.cam, fwd.state, fx.upstream));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_RenderBackward)->Args({64, 300})->Args({128, 1000})->Args({256, 5000})->Unit(benchmark::kMillisecond);

void BM_GridToneMap(benchmark::State& state) {
  const Fixture fx(64, 300);
  AsymmetricGrid grid;
  init_grid_from_sigmoid(grid);
  const ToneMapper mapper = ToneMapper::grid(grid);
  const RenderOutput fwd = render_irradiance(fx.scene, fx.cam);
  for (auto _ : state) benchmark::DoNotOptimize(tone_map(fwd.image, mapper, 0.0));
}
BENCHMARK(BM_GridToneMap);

void BM_TotalLoss(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const ImageD pred = testing::random_image(rng, 64, 64, 0.0, 1.0);
  const ImageD target = testing::random_image(rng, 64, 64, 0.0, 1.0);
  AsymmetricGrid grid;
  init_grid_from_sigmoid(grid);
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(pred, target, &grid, LossConfig{}));
}
BENCHMARK(BM_TotalLoss)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace hdrgs

BENCHMARK_MAIN();
