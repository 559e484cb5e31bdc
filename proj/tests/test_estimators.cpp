#include <doctest.h>

#include <cmath>

#include <Eigen/SVD>

#include "mdsyn/estimators.hpp"
#include "test_support.hpp"

using namespace mdsyn;
using namespace mdsyn::estimators;

namespace {

// Independent reference: solve the 8x8 system (h33 = 1) with long double
// Gaussian elimination and partial pivoting.
Mat3 oracle_homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
  long double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const long double x = src[i].x(), y = src[i].y(), u = dst[i].x(), v = dst[i].y();
    long double r1[9] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
    long double r2[9] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
    for (int k = 0; k < 9; ++k) {
      a[2 * i][k] = r1[k];
      a[2 * i + 1][k] = r2[k];
    }
  }
  for (int c = 0; c < 8; ++c) {
    int piv = c;
    for (int r = c + 1; r < 8; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    for (int k = 0; k < 9; ++k) std::swap(a[c][k], a[piv][k]);
    for (int r = 0; r < 8; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (int k = c; k < 9; ++k) a[r][k] -= f * a[c][k];
    }
  }
  Mat3 h;
  for (int i = 0; i < 8; ++i) h(i / 3, i % 3) = static_cast<double>(a[i][8] / a[i][i]);
  h(2, 2) = 1.0;
  return h;
}

Homography random_homography(Rng& rng) {
  Mat3 m;
  m << uniform(rng, 0.7, 1.3), uniform(rng, -0.3, 0.3), uniform(rng, -40, 40), uniform(rng, -0.3, 0.3),
      uniform(rng, 0.7, 1.3), uniform(rng, -40, 40), uniform(rng, -5e-4, 5e-4), uniform(rng, -5e-4, 5e-4), 1.0;
  return Homography(m);
}

MatchSet matches_from(const Homography& h, Rng& rng, int n, double w = 640, double hgt = 480) {
  MatchSet ms;
  for (int i = 0; i < n; ++i) {
    const Vec2 p(uniform(rng, 0, w), uniform(rng, 0, hgt));
    const Vec2 q = apply_homography(h, p);
    ms.matches.push_back({p.x(), p.y(), q.x(), q.y(), 1.0});
  }
  return ms;
}

struct Rig {
  CameraModel cam{500, 500, 320, 240, 640, 480};
  Pose a_to_b;
  MatchSet matches;
};

Rig random_rig(Rng& rng, int n, double outlier_fraction = 0.0) {
  Rig rig;
  Vec3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  rig.a_to_b.R = axis_angle(axis.normalized(), uniform(rng, 0.05, 0.3));
  Vec3 t(uniform(rng, -1, 1), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
  rig.a_to_b.t = t.normalized() * uniform(rng, 0.5, 1.0);
  while (static_cast<int>(rig.matches.size()) < n) {
    const Vec3 x(uniform(rng, -2, 2), uniform(rng, -1.5, 1.5), uniform(rng, 4, 8));
    const Vec3 xb = rig.a_to_b.apply(x);
    if (xb.z() <= 0.1) continue;
    const Vec2 pa(500 * x.x() / x.z() + 320, 500 * x.y() / x.z() + 240);
    const Vec2 pb(500 * xb.x() / xb.z() + 320, 500 * xb.y() / xb.z() + 240);
    rig.matches.matches.push_back({pa.x(), pa.y(), pb.x(), pb.y(), 1.0});
  }
  const int outliers = static_cast<int>(outlier_fraction * n);
  for (int i = 0; i < outliers; ++i) {
    auto& m = rig.matches.matches[i];
    m.xb = uniform(rng, 0, 640);
    m.yb = uniform(rng, 0, 480);
  }
  return rig;
}

}  // namespace

TEST_CASE("four-point DLT agrees with the extended-precision oracle") {
  Rng rng = derive_rng(1, "dlt4");
  for (int trial = 0; trial < 100; ++trial) {
    const Homography h = random_homography(rng);
    const MatchSet ms = matches_from(h, rng, 4);
    std::array<Vec2, 4> src, dst;
    for (int i = 0; i < 4; ++i) {
      src[i] = ms.matches[i].a();
      dst[i] = ms.matches[i].b();
    }
    const Homography est = estimate_homography_dlt(ms);
    CHECK(corner_error(est, Homography(oracle_homography(src, dst)), 640, 480) < 1e-6);
  }
}

TEST_CASE("DLT is exact on noiseless overdetermined data") {
  Rng rng = derive_rng(2, "dlt");
  const Homography h = random_homography(rng);
  CHECK(corner_error(estimate_homography_dlt(matches_from(h, rng, 50)), h, 640, 480) < 1e-8);
}

TEST_CASE("DLT degenerate and undersized inputs") {
  MatchSet ms;
  for (int i = 0; i < 6; ++i) ms.matches.push_back({double(i), double(i), double(i), double(2 * i), 1});
  try {
    estimate_homography_dlt(ms);
    FAIL("expected DegenerateConfiguration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfiguration);
  }
  ms.matches.resize(3);
  CHECK_THROWS_AS(estimate_homography_dlt(ms), Error);
}

TEST_CASE("corner error of a pure shift") {
  CHECK(corner_error(Homography::translation(3, 4), Homography::identity(), 640, 480) == doctest::Approx(5.0));
  CHECK(corner_error(Homography::identity(), Homography::identity(), 640, 480) == 0.0);
}

TEST_CASE("symmetric transfer error") {
  const Homography h = Homography::translation(1, 0);
  const Match m{0, 0, 2, 0, 1};
  CHECK(symmetric_transfer_error(h, h.inverse().matrix(), m) == doctest::Approx(1.0));
}

TEST_CASE("RANSAC homography rejects outliers") {
  Rng rng = derive_rng(3, "rh");
  const Homography h = random_homography(rng);
  MatchSet ms = matches_from(h, rng, 100);
  for (int i = 0; i < 50; ++i) {
    ms.matches[i].xb = uniform(rng, 0, 640);
    ms.matches[i].yb = uniform(rng, 0, 480);
  }
  RansacConfig cfg = default_homography_ransac();
  cfg.seed = 9;
  const auto r = ransac_homography(ms, cfg);
  CHECK(corner_error(r.model, h, 640, 480) < 1e-6);
  CHECK(r.inlier_count() >= 50);
  for (int i = 50; i < 100; ++i) CHECK(r.inliers[i]);
  const auto again = ransac_homography(ms, cfg);
  CHECK(again.model == r.model);
}

TEST_CASE("RANSAC homography fails on too few matches") {
  MatchSet ms;
  ms.matches.push_back({0, 0, 1, 1, 1});
  try {
    ransac_homography(ms, default_homography_ransac());
    FAIL("expected EstimationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EstimationFailed);
  }
}

TEST_CASE("essential from pose satisfies the epipolar constraint") {
  Rng rng = derive_rng(4, "ess");
  const Rig rig = random_rig(rng, 30);
  const Mat3 e = essential_from_pose(rig.a_to_b);
  for (const Match& m : rig.matches.matches) CHECK(epipolar_error(e, m, rig.cam, rig.cam) < 1e-9);
  const Eigen::JacobiSVD<Mat3> svd(e);
  CHECK(svd.singularValues()(2) < 1e-12);
  CHECK(svd.singularValues()(0) == doctest::Approx(svd.singularValues()(1)));
}

TEST_CASE("eight-point essential recovers the pose among its decompositions") {
  Rng rng = derive_rng(5, "8pt");
  for (int trial = 0; trial < 20; ++trial) {
    const Rig rig = random_rig(rng, 40);
    const Mat3 e = estimate_essential_8pt(rig.matches, rig.cam, rig.cam);
    double best = 1e9;
    for (const Pose& p : decompose_essential(e)) best = std::min(best, pose_error(p, rig.a_to_b));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("RANSAC essential with outliers") {
  Rng rng = derive_rng(6, "re");
  for (int trial = 0; trial < 5; ++trial) {
    const Rig rig = random_rig(rng, 100, 0.3);
    RansacConfig cfg = default_essential_ransac();
    cfg.seed = trial;
    const auto r = ransac_essential(rig.matches, rig.cam, rig.cam, cfg);
    CHECK(rotation_error_deg(r.model.R, rig.a_to_b.R) < 1.0);
    CHECK(translation_error_deg(r.model.t, rig.a_to_b.t) < 1.0);
  }
}

TEST_CASE("zero baseline is reported as degenerate") {
  Rng rng = derive_rng(7, "zb");
  Rig rig = random_rig(rng, 50);
  rig.a_to_b.t = Vec3::Zero();
  rig.matches.matches.clear();
  for (int i = 0; i < 50; ++i) {
    const Vec3 x(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 3, 6));
    const Vec3 xb = rig.a_to_b.apply(x);
    rig.matches.matches.push_back({500 * x.x() / x.z() + 320, 500 * x.y() / x.z() + 240,
                                   500 * xb.x() / xb.z() + 320, 500 * xb.y() / xb.z() + 240, 1});
  }
  try {
    ransac_essential(rig.matches, rig.cam, rig.cam, default_essential_ransac());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfiguration);
  }
}

TEST_CASE("angular error conventions") {
  const Mat3 r = axis_angle(Vec3(0, 1, 0), 10.0 * M_PI / 180.0);
  CHECK(rotation_error_deg(r, Mat3::Identity()) == doctest::Approx(10.0));
  CHECK(translation_error_deg(Vec3(1, 0, 0), Vec3(0, 2, 0)) == doctest::Approx(90.0));
  CHECK(translation_error_deg(Vec3(1, 0, 0), Vec3(-1, 0, 0)) == doctest::Approx(180.0));
  CHECK(translation_error_deg(Vec3(1, 0, 0), Vec3::Zero()) == 0.0);
  CHECK(translation_error_deg(Vec3::Zero(), Vec3(1, 0, 0)) == 90.0);
  Pose a, b;
  a.R = r;
  a.t = Vec3(1, 0, 0);
  b.t = Vec3(1, 0.01, 0);
  CHECK(pose_error(a, b) == doctest::Approx(10.0));
}

TEST_CASE("normalized epipolar error of a known offset") {
  // Pure x-translation: epipolar lines are horizontal, so a vertical offset d
  // gives a symmetric error of sqrt(2) * d.
  Pose p;
  p.t = Vec3(1, 0, 0);
  const Mat3 e = essential_from_pose(p);
  CHECK(epipolar_error_normalized(e, Vec2(0.1, 0.2), Vec2(0.3, 0.2)) == doctest::Approx(0.0));
  CHECK(epipolar_error_normalized(e, Vec2(0.1, 0.2), Vec2(0.3, 0.21)) == doctest::Approx(std::sqrt(2.0) * 0.01));
}
