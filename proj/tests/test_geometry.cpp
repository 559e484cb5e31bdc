#include <doctest.h>

#include <cmath>

#include "mdsyn/geometry.hpp"
#include "mdsyn/image.hpp"
#include "mdsyn/random.hpp"
#include "test_support.hpp"

using namespace mdsyn;

namespace {

// Rotation matrix from a unit quaternion (w, x, y, z), written out by hand.
Mat3 quat_to_rot(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n, x /= n, y /= n, z /= n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Pose random_pose(Rng& rng) {
  Pose p;
  p.R = quat_to_rot(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  p.t = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
  return p;
}

}  // namespace

TEST_CASE("homography canonical form is scale invariant") {
  Mat3 m;
  m << 1.2, 0.1, 5, -0.2, 0.9, 3, 1e-3, 2e-4, 1;
  const Homography a(m), b(-3.5 * m), c(1e-4 * m);
  CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((a.matrix() - c.matrix()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(a.matrix().norm() == doctest::Approx(1.0).epsilon(1e-14));
  Eigen::Index r, cidx;
  a.matrix().cwiseAbs().maxCoeff(&r, &cidx);
  CHECK(a.matrix()(r, cidx) > 0);
  CHECK(a.affine_scaled()(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("identity homography is exact under affine scaling") {
  CHECK(Homography::identity().affine_scaled() == Mat3::Identity());
  const Vec2 p = apply_homography(Homography::identity(), Vec2(12.25, -3.5));
  CHECK(p.x() == 12.25);
  CHECK(p.y() == -3.5);
}

TEST_CASE("point at infinity is reported") {
  Mat3 m = Mat3::Identity();
  m(2, 0) = 1.0;
  m(2, 2) = 0.0;
  CHECK_THROWS_AS(apply_homography(m, Vec2(0.0, 5.0)), Error);
  try {
    apply_homography(m, Vec2(0.0, 5.0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PointAtInfinity);
  }
}

TEST_CASE("four-point homography reproduces a known map") {
  Rng rng = derive_rng(11, "h4");
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 m;
    m << uniform(rng, 0.8, 1.2), uniform(rng, -0.2, 0.2), uniform(rng, -20, 20), uniform(rng, -0.2, 0.2),
        uniform(rng, 0.8, 1.2), uniform(rng, -20, 20), uniform(rng, -1e-3, 1e-3), uniform(rng, -1e-3, 1e-3), 1.0;
    const Homography h(m);
    const auto src = image_corners(320, 240);
    std::array<Vec2, 4> dst;
    for (int i = 0; i < 4; ++i) dst[i] = apply_homography(h, src[i]);
    const Homography est = homography_from_4_points(src, dst);
    CHECK((est.matrix() - h.matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("four-point homography rejects collinear points") {
  const std::array<Vec2, 4> src{Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), Vec2(0, 5)};
  const std::array<Vec2, 4> dst{Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  try {
    homography_from_4_points(src, dst);
    FAIL("expected DegenerateConfiguration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfiguration);
  }
}

TEST_CASE("image corners use pixel centres") {
  const auto c = image_corners(640, 480);
  CHECK(c[0] == Vec2(0, 0));
  CHECK(c[1] == Vec2(639, 0));
  CHECK(c[2] == Vec2(639, 479));
  CHECK(c[3] == Vec2(0, 479));
}

TEST_CASE("relative pose agrees with the quaternion oracle") {
  Rng rng = derive_rng(5, "rel");
  for (int trial = 0; trial < 100; ++trial) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    const Pose ab = relative_pose(a, b);
    const Vec3 x(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    CHECK((ab.apply(a.apply(x)) - b.apply(x)).norm() < 1e-12);
    CHECK_NOTHROW(ab.validate());
  }
}

TEST_CASE("axis-angle matches the quaternion formula") {
  Rng rng = derive_rng(6, "aa");
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    axis.normalize();
    const double theta = uniform(rng, -M_PI, M_PI);
    const Mat3 q = quat_to_rot(std::cos(theta / 2), axis.x() * std::sin(theta / 2), axis.y() * std::sin(theta / 2),
                               axis.z() * std::sin(theta / 2));
    CHECK((axis_angle(axis, theta) - q).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pose validation and inverse") {
  Pose p;
  p.R = axis_angle(Vec3(0, 0, 1), 0.3);
  p.t = Vec3(1, 2, 3);
  const Pose id = p.compose(p.inverse());
  CHECK((id.R - Mat3::Identity()).norm() < 1e-12);
  CHECK(id.t.norm() < 1e-12);
  Pose bad = p;
  bad.R(0, 0) += 1e-3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.R = -Mat3::Identity();
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("camera normalization and scaling") {
  const CameraModel cam{500, 520, 320, 240, 640, 480};
  CHECK_NOTHROW(cam.validate());
  const Vec2 n = cam.normalize(Vec2(820, 240));
  CHECK(n.x() == doctest::Approx(1.0));
  CHECK(n.y() == doctest::Approx(0.0));
  CHECK((cam.K() * cam.K_inverse() - Mat3::Identity()).norm() < 1e-12);
  const CameraModel half = cam.scaled(0.5, 320, 240);
  // A pixel scaled with the image keeps its normalized coordinates.
  CHECK((half.normalize(Vec2(410, 60)) - cam.normalize(Vec2(820, 120))).norm() < 1e-12);
  CHECK_THROWS_AS((CameraModel{0, 1, 0, 0, 1, 1}.validate()), Error);
  CHECK_THROWS_AS((CameraModel{1, 1, 10, 0, 5, 5}.validate()), Error);
}

TEST_CASE("depth sampling is bilinear and respects invalid taps") {
  DepthMap d(4, 3, 2.0f);
  d.set(1, 0, 4.0f);
  CHECK(*d.sample(Vec2(0.5, 0.0)) == doctest::Approx(3.0));
  CHECK(*d.sample(Vec2(3.0, 2.0)) == doctest::Approx(2.0));
  CHECK_FALSE(d.sample(Vec2(3.1, 0.0)).has_value());
  CHECK_FALSE(d.sample(Vec2(-0.1, 0.0)).has_value());
  d.set(2, 2, 0.0f);
  CHECK_FALSE(d.sample(Vec2(1.5, 1.5)).has_value());
  CHECK(d.sample(Vec2(1.0, 1.0)).has_value());
}

TEST_CASE("depth files round-trip") {
  testing::TempDir tmp;
  DepthMap d(5, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) d.set(x, y, 0.5f * x + y);
  d.write_raw(tmp / "d.bin");
  const DepthMap r = DepthMap::load(tmp / "d.bin");
  CHECK(r.values() == d.values());

  ImageU16 png(3, 2, 1);
  png(0, 0) = 1000;
  png(2, 1) = 2500;
  write_png16(tmp / "d.png", png);
  const DepthMap p = DepthMap::load(tmp / "d.png");
  CHECK(p.at(0, 0) == doctest::Approx(1.0));
  CHECK(p.at(2, 1) == doctest::Approx(2.5));
  CHECK(p.at(1, 0) == 0.0f);
}

TEST_CASE("png round-trip preserves pixels") {
  testing::TempDir tmp;
  const ImageU8 img = testing::textured_image(37, 23, 3);
  write_png(tmp / "a.png", img);
  CHECK(read_png(tmp / "a.png") == img);
  CHECK_THROWS_AS(read_png(tmp / "missing.png"), Error);
}

TEST_CASE("ground-truth correspondence on a fronto-parallel plane") {
  // Plane at depth Z, camera B translated sideways by tx: the oracle shift is f * tx / Z.
  const double z = 4.0, tx = 0.2;
  const CameraModel cam{400, 400, 160, 120, 320, 240};
  const DepthMap da(320, 240, static_cast<float>(z)), db(320, 240, static_cast<float>(z));
  Pose ab;
  ab.t = Vec3(-tx, 0, 0);
  const Vec2 p(100.5, 80.25);
  const auto q = gt_correspondence(da, cam, cam, ab, db, p);
  REQUIRE(q.has_value());
  CHECK(q->x() == doctest::Approx(p.x() - 400 * tx / z));
  CHECK(q->y() == doctest::Approx(p.y()));

  // Occluder in B: depth disagrees beyond the tolerance.
  DepthMap occluded(320, 240, static_cast<float>(z * 0.5));
  CHECK_FALSE(gt_correspondence(da, cam, cam, ab, occluded, p).has_value());
  // Projection leaves image B.
  CHECK_FALSE(gt_correspondence(da, cam, cam, ab, db, Vec2(2.0, 80.0)).has_value());

  DepthMap holes(320, 240, 0.0f);
  try {
    gt_correspondence(holes, cam, cam, ab, db, p);
    FAIL("expected InvalidDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDepth);
  }
  CHECK_THROWS_AS(gt_correspondence(da, cam, cam, ab, db, Vec2(-1, 0)), Error);
}
