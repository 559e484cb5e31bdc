#include <benchmark/benchmark.h>

#include "mdsyn/kernels.hpp"
#include "mdsyn/random.hpp"

using namespace mdsyn;

namespace {

ImageF random_image(int w, int h, std::uint64_t seed) {
  Rng rng = derive_rng(seed, "bench");
  ImageF img(w, h, 1);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(uniform01(rng));
  return img;
}

ImageU8 random_u8(int w, int h, std::uint64_t seed) {
  Rng rng = derive_rng(seed, "bench-u8");
  ImageU8 img(w, h, 1);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return img;
}

Mat3 small_rotation() {
  Mat3 h;
  h << 0.99, -0.05, 12.0, 0.05, 0.99, -7.0, 1e-5, -2e-5, 1.0;
  return h;
}

void BM_WarpSerial(benchmark::State& st) {
  const ImageF img = random_image(640, 480, 1);
  for (auto _ : st) benchmark::DoNotOptimize(serial::warp_bilinear(img, small_rotation(), 640, 480));
}
void BM_WarpParallel(benchmark::State& st) {
  const ImageF img = random_image(640, 480, 1);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::warp_bilinear(img, small_rotation(), 640, 480));
}

void BM_HarrisSerial(benchmark::State& st) {
  const ImageF img = random_image(640, 480, 2);
  for (auto _ : st) benchmark::DoNotOptimize(serial::harris_response(img, 1.0, 0.04));
}
void BM_HarrisParallel(benchmark::State& st) {
  const ImageF img = random_image(640, 480, 2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::harris_response(img, 1.0, 0.04));
}

void BM_SsimSerial(benchmark::State& st) {
  const ImageU8 a = random_u8(256, 256, 3), b = random_u8(256, 256, 4);
  for (auto _ : st) benchmark::DoNotOptimize(serial::ssim_map(a, b));
}
void BM_SsimParallel(benchmark::State& st) {
  const ImageU8 a = random_u8(256, 256, 3), b = random_u8(256, 256, 4);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::ssim_map(a, b));
}

void BM_EventsSerial(benchmark::State& st) {
  const ImageF f0 = random_image(640, 480, 5), f1 = random_image(640, 480, 6);
  const GridD l1 = serial::log_intensity(f1, 1e-3);
  for (auto _ : st) {
    GridD ref = serial::log_intensity(f0, 1e-3);
    benchmark::DoNotOptimize(serial::event_counts(ref, l1, 0.2));
  }
}
void BM_EventsParallel(benchmark::State& st) {
  const ImageF f0 = random_image(640, 480, 5), f1 = random_image(640, 480, 6);
  const GridD l1 = kernels::log_intensity(f1, 1e-3);
  for (auto _ : st) {
    GridD ref = kernels::log_intensity(f0, 1e-3);
    benchmark::DoNotOptimize(kernels::event_counts(ref, l1, 0.2));
  }
}

}  // namespace

BENCHMARK(BM_WarpSerial);
BENCHMARK(BM_WarpParallel);
BENCHMARK(BM_HarrisSerial);
BENCHMARK(BM_HarrisParallel);
BENCHMARK(BM_SsimSerial);
BENCHMARK(BM_SsimParallel);
BENCHMARK(BM_EventsSerial);
BENCHMARK(BM_EventsParallel);

BENCHMARK_MAIN();
