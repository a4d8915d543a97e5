#include <benchmark/benchmark.h>

#include <random>

#include "xsr/drr.hpp"
#include "xsr/metrics.hpp"
#include "xsr/network.hpp"
#include "xsr/spectrum.hpp"
#include "xsr/volume.hpp"

using namespace xsr;

namespace {

const CtVolume& phantom() {
  static const CtVolume vol = generate_phantom(head_phantom_spec(0));
  return vol;
}

Image noise(int h, int w, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

ViewPose pose(int size) {
  ViewPose p;
  p.theta_x = 30;
  p.theta_y = 45;
  p.det_w = p.det_h = size;
  return p;
}

void BM_RenderParallel(benchmark::State& st) {
  const OpacityLut lut;
  const ViewPose p = pose(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(render(phantom(), lut, p));
}
void BM_RenderSerial(benchmark::State& st) {
  const OpacityLut lut;
  const ViewPose p = pose(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(render_serial(phantom(), lut, p));
}
BENCHMARK(BM_RenderParallel)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RenderSerial)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Rfft2Parallel(benchmark::State& st) {
  const Image img = noise(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(rfft2(img));
}
void BM_Rfft2Serial(benchmark::State& st) {
  const Image img = noise(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(rfft2_serial(img));
}
BENCHMARK(BM_Rfft2Parallel)->Arg(160)->Arg(512)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_Rfft2Serial)->Arg(160)->Arg(512)->Unit(benchmark::kMicrosecond)->UseRealTime();

void BM_Ssim(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const Image a = noise(n, n, 2), b = noise(n, n, 3);
  for (auto _ : st) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(160)->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Forward(benchmark::State& st) {
  const Weights<float> w = Weights<float>::he_normal(0);
  const int n = static_cast<int>(st.range(0));
  const Image x = noise(n, n, 4);
  for (auto _ : st) benchmark::DoNotOptimize(forward(w, x));
}
BENCHMARK(BM_Forward)->Arg(160)->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();

void backward_batch(benchmark::State& st, bool parallel) {
  const Weights<float> w = Weights<float>::he_normal(0);
  std::vector<Image> in, hr;
  for (int i = 0; i < 4; ++i) {
    in.push_back(noise(48, 48, 10 + i));
    hr.push_back(noise(48, 48, 20 + i));
  }
  std::vector<Sample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(Sample{&in[i], &hr[i]});
  for (auto _ : st) benchmark::DoNotOptimize(backward(w, std::span<const Sample>(batch), LossWeights{}, parallel));
}
void BM_BackwardParallel(benchmark::State& st) { backward_batch(st, true); }
void BM_BackwardSerial(benchmark::State& st) { backward_batch(st, false); }
BENCHMARK(BM_BackwardParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BackwardSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
