#include <doctest.h>

#include <omp.h>

#include "mdsyn/kernels.hpp"
#include "test_support.hpp"

using namespace mdsyn;

namespace {

ImageU8 random_u8(int w, int h, std::uint64_t seed) {
  Rng rng = derive_rng(seed, "u8");
  ImageU8 img(w, h, 1);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return img;
}

}  // namespace

TEST_CASE("parallel kernels match the serial references") {
  const ImageF img = testing::random_gray(97, 61, 1);
  Mat3 h;
  h << 0.98, -0.04, 3.2, 0.05, 1.01, -2.7, 1e-4, -2e-4, 1.0;
  CHECK(kernels::warp_bilinear(img, h, 90, 70) == serial::warp_bilinear(img, h, 90, 70));
  CHECK(kernels::log_intensity(img, 1e-3) == serial::log_intensity(img, 1e-3));

  GridD r1 = kernels::log_intensity(img, 1e-3), r2 = r1;
  const GridD target = kernels::log_intensity(testing::random_gray(97, 61, 2), 1e-3);
  CHECK(kernels::event_counts(r1, target, 0.17) == serial::event_counts(r2, target, 0.17));
  CHECK(r1 == r2);

  const ImageF hk = kernels::harris_response(img, 1.0, 0.04);
  const ImageF hs = serial::harris_response(img, 1.0, 0.04);
  REQUIRE(hk.same_shape(hs));
  for (std::size_t i = 0; i < hk.size(); ++i) CHECK(hk.data()[i] == doctest::Approx(hs.data()[i]).epsilon(1e-5));

  GridD g(41, 33, 1);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = img.data()[i];
  const GridD bk = kernels::gaussian_blur(g, 1.5, 5), bs = serial::gaussian_blur(g, 1.5, 5);
  for (std::size_t i = 0; i < bk.size(); ++i) CHECK(bk.data()[i] == doctest::Approx(bs.data()[i]).epsilon(1e-12));

  const ImageU8 a = random_u8(40, 30, 3), b = random_u8(40, 30, 4);
  const GridD sk = kernels::ssim_map(a, b), ss = serial::ssim_map(a, b);
  REQUIRE(sk.width() == 30);
  REQUIRE(sk.height() == 20);
  for (std::size_t i = 0; i < sk.size(); ++i) CHECK(sk.data()[i] == doctest::Approx(ss.data()[i]).epsilon(1e-9));
}

TEST_CASE("parallel kernels do not depend on the thread count") {
  const ImageF img = testing::random_gray(120, 80, 5);
  const int before = omp_get_max_threads();
  omp_set_num_threads(1);
  const ImageF h1 = kernels::harris_response(img, 1.0, 0.04);
  omp_set_num_threads(4);
  const ImageF h4 = kernels::harris_response(img, 1.0, 0.04);
  omp_set_num_threads(before);
  CHECK(h1 == h4);
}

TEST_CASE("gaussian taps are normalized and symmetric") {
  const auto t = gaussian_taps(1.5, 5);
  REQUIRE(t.size() == 11);
  double s = 0;
  for (double v : t) s += v;
  CHECK(s == doctest::Approx(1.0));
  CHECK(t[0] == t[10]);
}

TEST_CASE("warp leaves unmapped pixels black") {
  const ImageF img(10, 10, 1, 1.0f);
  Mat3 shift = Mat3::Identity();
  shift(0, 2) = 5.0;
  const ImageF out = kernels::warp_bilinear(img, shift, 10, 10);
  CHECK(out(4, 3) == 1.0f);
  CHECK(out(5, 3) == 0.0f);
}
