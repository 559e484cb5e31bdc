#include <doctest.h>

#include <cmath>

#include "mdsyn/augment.hpp"
#include "test_support.hpp"

using namespace mdsyn;
using namespace mdsyn::augment;

TEST_CASE("corner perturbation respects its bound") {
  WarpConfig cfg;
  cfg.perturbation = 0.2;
  Rng rng = derive_rng(3, "warp");
  for (int trial = 0; trial < 200; ++trial) {
    const SampledWarp w = sample_warp(cfg, 320, 200, rng);
    for (const Vec2& c : image_corners(320, 200)) {
      const Vec2 d = apply_homography(w.perturbation, c) - c;
      CHECK(std::abs(d.x()) <= 0.2 * 200 + 1e-9);
      CHECK(std::abs(d.y()) <= 0.2 * 200 + 1e-9);
    }
    CHECK(w.scale >= 1.0 - cfg.scale_range);
    CHECK(w.scale <= 1.0 + cfg.scale_range);
    const Mat3 expected = w.similarity.matrix() * w.perturbation.matrix();
    CHECK(Homography(expected) == w.total);
  }
}

TEST_CASE("zero ranges give the identity warp") {
  WarpConfig cfg{0.0, 0.0, 0.0, 0.0, 1};
  const Homography h = sample_homography(cfg, 100, 80);
  CHECK((h.matrix() - Homography::identity().matrix()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("warp sampling is seeded") {
  WarpConfig cfg;
  cfg.seed = 42;
  CHECK(sample_homography(cfg, 640, 480) == sample_homography(cfg, 640, 480));
  WarpConfig other = cfg;
  other.seed = 43;
  CHECK_FALSE(sample_homography(cfg, 640, 480) == sample_homography(other, 640, 480));
}

TEST_CASE("warp config validation") {
  WarpConfig cfg;
  cfg.perturbation = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.perturbation = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("identity warp is bit exact") {
  const ImageF img = to_float(testing::textured_image(50, 40, 2));
  CHECK(warp_image(img, Homography::identity(), 50, 40) == img);
}

TEST_CASE("integer translation moves pixels exactly") {
  const ImageF img = to_float(testing::textured_image(50, 40, 2));
  const ImageF out = warp_image(img, Homography::translation(3, -2), 50, 40);
  for (int y = 0; y < 38; ++y)
    for (int x = 3; x < 50; ++x)
      for (int c = 0; c < 3; ++c) CHECK(out(x, y, c) == doctest::Approx(img(x - 3, y + 2, c)).epsilon(1e-6));
  CHECK(out(0, 10, 0) == 0.0f);
}

TEST_CASE("resizing rescales coordinates exactly") {
  // A linear ramp is reproduced exactly by bilinear sampling, so the value at
  // output (x, y) reveals the source position it came from.
  ImageF ramp(200, 120, 1);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 200; ++x) ramp(x, y) = static_cast<float>(x + 1000.0 * y);
  const ImageF up = resize_to(ramp, 2.0, 400, 240);
  for (int y = 0; y < 238; y += 7)
    for (int x = 0; x < 398; x += 5) CHECK(up(x, y) == doctest::Approx(x / 2.0 + 1000.0 * (y / 2.0)).epsilon(1e-6));
  // Past the last source centre the edge is replicated instead of going black.
  CHECK(up(399, 0) == doctest::Approx(199.0));
}

TEST_CASE("long-side resizing") {
  const ImageF img(1000, 500, 1, 0.5f);
  const Resized r = resize_long_side(img, 640);
  CHECK(r.image.width() == 640);
  CHECK(r.image.height() == 320);
  CHECK(r.scale == doctest::Approx(0.64));
  // Constant images stay constant through the prefilter.
  CHECK(r.image(100, 100) == doctest::Approx(0.5f));
  const Resized tall = resize_long_side(ImageF(300, 901, 1), 640);
  CHECK(tall.image.height() == 640);
  CHECK(tall.image.width() == round_half_up(300 * 640.0 / 901));
  const Resized same = resize_long_side(img, 1000);
  CHECK(same.scale == 1.0);
  CHECK(same.image == img);
}

TEST_CASE("pad to square keeps content at the origin") {
  const ImageF img(80, 40, 1, 1.0f);
  const ImageF sq = resize_pad_square(img, 64);
  CHECK(sq.width() == 64);
  CHECK(sq.height() == 64);
  CHECK(sq(10, 10) == doctest::Approx(1.0f));
  CHECK(sq(10, 40) == 0.0f);
}

TEST_CASE("homography rescaling commutes with point scaling") {
  Mat3 m;
  m << 1.1, 0.05, 10, -0.03, 0.95, -4, 2e-4, -1e-4, 1;
  const Homography h(m);
  const Homography r = rescale_homography(h, 0.5, 0.25);
  const Vec2 p(123, 45);
  const Vec2 expect = 0.25 * apply_homography(h, p);
  const Vec2 got = apply_homography(r, 0.5 * p);
  CHECK((expect - got).norm() < 1e-9);
}

TEST_CASE("round half up") {
  CHECK(round_half_up(2.5) == 3);
  CHECK(round_half_up(2.49) == 2);
  CHECK(round_half_up(-2.5) == -2);
}
