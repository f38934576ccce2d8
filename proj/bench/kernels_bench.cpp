// Serial reference vs OpenMP for the image kernels, the tracking cost matrix
// and scene rendering. Run with --benchmark_filter to pick one family.

#include <benchmark/benchmark.h>

#include <random>

#include "ami/inference/backends.hpp"
#include "ami/kernels/image.hpp"
#include "ami/synthgen/scene.hpp"
#include "ami/tracking/tracking.hpp"
#include "synth_fixtures.hpp"

using namespace ami;
using kernels::Execution;

namespace {

// A pale frame with dark insect-sized blobs, the detector's usual input.
const Raster& trap_frame() {
  static const Raster frame = [] {
    std::mt19937_64 rng(1);
    Raster r(1920, 1080);
    for (int y = 0; y < r.height(); ++y)
      for (int x = 0; x < r.width(); ++x) {
        const auto v = static_cast<std::uint8_t>(200 + rng() % 20);
        r.set(x, y, {v, v, v, 255});
      }
    for (int k = 0; k < 150; ++k) {
      const int cx = 40 + rng() % 1840, cy = 40 + rng() % 1000, rad = 8 + rng() % 25;
      for (int y = cy - rad; y <= cy + rad; ++y)
        for (int x = cx - rad; x <= cx + rad; ++x)
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad) r.set(x, y, {40, 35, 30, 255});
    }
    return r;
  }();
  return frame;
}

Execution exec_of(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "omp" : "serial"); }

void BM_ToGray(benchmark::State& state) {
  label(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::to_gray(trap_frame(), exec_of(state)));
}

void BM_MedianGray(benchmark::State& state) {
  label(state);
  const auto gray = kernels::to_gray_serial(trap_frame());
  for (auto _ : state) benchmark::DoNotOptimize(kernels::median_gray(gray, exec_of(state)));
}

void BM_ThresholdAbsdiff(benchmark::State& state) {
  label(state);
  const auto gray = kernels::to_gray_serial(trap_frame());
  for (auto _ : state) benchmark::DoNotOptimize(kernels::threshold_absdiff(gray, 210, 40, exec_of(state)));
}

void BM_LabelComponents(benchmark::State& state) {
  label(state);
  const auto gray = kernels::to_gray_serial(trap_frame());
  const auto dm = kernels::threshold_absdiff_serial(gray, 210, 40);
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::label_components(dm.mask, dm.diff, gray.width, gray.height, exec_of(state)));
}

void BM_BlobDetect(benchmark::State& state) {
  label(state);
  inference::BlobParams p;
  p.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(inference::blob_detect(trap_frame(), p));
}

void BM_CostMatrix(benchmark::State& state) {
  label(state);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(0, 1800), feat(-1, 1);
  auto make = [&] {
    std::vector<inference::Detection> v;
    for (std::size_t i = 0; i < 200; ++i) {
      inference::Detection d;
      d.index = i;
      const double x = pos(rng), y = pos(rng) / 2;
      d.box = {x, y, x + 40, y + 30};
      d.feature = std::vector<double>(256);
      for (auto& f : *d.feature) f = feat(rng);
      v.push_back(std::move(d));
    }
    return v;
  };
  const auto a = make(), b = make();
  tracking::TrackerConfig cfg;
  cfg.image_diag = 2200;
  cfg.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(tracking::cost_matrix(a, b, cfg));
}

void BM_RenderScenes(benchmark::State& state) {
  label(state);
  const std::vector<Raster> bgs{fixture::noise_background(640, 480, 1)};
  const auto crops = fixture::moth_crops(8, 2, 14, 60);
  synthgen::DatasetSpec spec;
  spec.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(synthgen::render_scenes(bgs, crops, spec, 0, 64, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

BENCHMARK(BM_ToGray)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MedianGray)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThresholdAbsdiff)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LabelComponents)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlobDetect)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CostMatrix)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderScenes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
