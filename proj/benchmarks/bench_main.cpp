// Microbenchmarks for the per-frame hot paths and the policy network.

#include <benchmark/benchmark.h>

#include <vector>

#include "adaptvo/frontend.hpp"
#include "adaptvo/nn.hpp"
#include "adaptvo/simworld.hpp"
#include "oracles.hpp"

using namespace adaptvo;

namespace {

std::vector<Point2> grid(int w, int h, int step) {
  std::vector<Point2> pts;
  for (int y = step; y < h - step; y += step)
    for (int x = step; x < w - step; x += step) pts.emplace_back(x, y);
  return pts;
}

void BM_DetectFast(benchmark::State& state) {
  const GrayImage img = oracle::smooth_texture(320, 240, 3, 0.0, 0.0, 2.0);
  const int threshold = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(detect_fast(img, threshold));
}
BENCHMARK(BM_DetectFast)->Arg(5)->Arg(20)->Arg(60);

void BM_TrackKlt(benchmark::State& state) {
  const GrayImage a = oracle::smooth_texture(320, 240, 5, 0.0, 0.0, 2.0);
  const GrayImage b = oracle::smooth_texture(320, 240, 5, 2.0, 1.0, 2.0);
  const auto pa = build_pyramid(a), pb = build_pyramid(b);
  const auto pts = grid(320, 240, 16);
  KltOptions opt;
  opt.patch_size = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(track_klt(pa, pb, pts, opt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_TrackKlt)->Arg(7)->Arg(21)->Arg(41);

void BM_Ransac(benchmark::State& state) {
  const auto tv = oracle::make_two_view(3, static_cast<int>(state.range(0)), 0.2, 0.3);
  RansacOptions opt;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_fundamental_ransac(tv.prev, tv.cur, 1.0, opt));
}
BENCHMARK(BM_Ransac)->Arg(100)->Arg(400);

void BM_RenderFrame(benchmark::State& state) {
  const Scene scene = generate_scene(1, TextureSpec{}, 5);
  const PinholeCamera cam = PinholeCamera::from_fov(128, 96, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(render_frame(scene, Pose(), cam));
}
BENCHMARK(BM_RenderFrame);

void BM_TrackerStep(benchmark::State& state) {
  WorldConfig world;
  world.width = 128;
  world.height = 96;
  world.n_frames = 32;
  const Episode ep = generate_episode(world, 4);
  const FrontendParams params{20, static_cast<int>(state.range(0)), 1.0};
  TrackerState tracker;
  std::size_t k = 0;
  for (auto _ : state) {
    if (k == ep.frames.size()) {
      state.PauseTiming();
      tracker = TrackerState{};
      k = 0;
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(step_tracker(tracker, ep.frames[k++].image, params));
  }
}
BENCHMARK(BM_TrackerStep)->Arg(9)->Arg(21);

void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(1);
  const MlpNet net = MlpNet::random({64, 64, 64, 3}, rng, Activation::Tanh);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(64, state.range(0));
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(3, state.range(0));
  for (auto _ : state) {
    MlpCache cache;
    benchmark::DoNotOptimize(mlp_forward(net, x, &cache));
    benchmark::DoNotOptimize(mlp_backward(net, cache, up));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(1)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
