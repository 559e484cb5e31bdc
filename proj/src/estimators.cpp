#include "mdsyn/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mdsyn/random.hpp"

namespace mdsyn::estimators {

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "RANSAC threshold must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "RANSAC needs at least one iteration");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "RANSAC confidence must lie in (0, 1)");
  }
}

RansacConfig default_homography_ransac() { return {3.0, 10000, 0.9999, 0}; }
RansacConfig default_essential_ransac() { return {5e-4, 10000, 0.9999, 0}; }

namespace {

constexpr double kRankTolerance = 1e-10;
using RowMajor9 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;

// Similarity moving the centroid to the origin with mean distance sqrt(2).
template <typename PointAt>
Mat3 hartley_transform(std::size_t n, PointAt point_at) {
  Vec2 mean = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) mean += point_at(i);
  mean /= static_cast<double>(n);
  double dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) dist += (point_at(i) - mean).norm();
  dist /= static_cast<double>(n);
  const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
  Mat3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Vec2 transform(const Mat3& t, const Vec2& p) {
  return {t(0, 0) * p.x() + t(0, 2), t(1, 1) * p.y() + t(1, 2)};
}

// Null vector of the design matrix; throws when its rank is below 8.
Eigen::Matrix<double, 9, 1> null_vector(const Eigen::Matrix<double, Eigen::Dynamic, 9>& a) {
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 9>> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || sv(0) <= 0.0 || sv(7) <= kRankTolerance * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "design matrix rank below 8");
  }
  return svd.matrixV().col(8);
}

std::vector<std::size_t> draw_sample(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> picked;
  picked.reserve(k);
  while (picked.size() < k) {
    const std::size_t idx = uniform_index(rng, n);
    if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
  }
  return picked;
}

int adaptive_bound(double inlier_ratio, int sample_size, const RansacConfig& cfg) {
  const double p_good = std::pow(inlier_ratio, sample_size);
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return cfg.max_iterations;
  const double needed = std::log(1.0 - cfg.confidence) / std::log(1.0 - p_good);
  if (!std::isfinite(needed) || needed >= cfg.max_iterations) return cfg.max_iterations;
  return std::max(1, static_cast<int>(std::ceil(needed)));
}

}  // namespace

Homography estimate_homography_dlt(std::span<const Match> matches) {
  const std::size_t n = matches.size();
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "DLT needs at least 4 correspondences");
  const Mat3 ta = hartley_transform(n, [&](std::size_t i) { return matches[i].a(); });
  const Mat3 tb = hartley_transform(n, [&](std::size_t i) { return matches[i].b(); });
  Eigen::Matrix<double, Eigen::Dynamic, 9> a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = transform(ta, matches[i].a());
    const Vec2 q = transform(tb, matches[i].b());
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  const Eigen::Matrix<double, 9, 1> h = null_vector(a);
  const Mat3 hn = Eigen::Map<const RowMajor9>(h.data());
  const Mat3 denorm = tb.inverse() * hn * ta;
  if (!denorm.allFinite() || std::abs(denorm.determinant()) < 1e-300) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT produced a singular homography");
  }
  return Homography(denorm);
}

Homography estimate_homography_dlt(const MatchSet& matches) { return estimate_homography_dlt(matches.matches); }

double symmetric_transfer_error(const Homography& h, const Mat3& h_inv, const Match& m) {
  const Vec3 fa = h.matrix() * Vec3(m.xa, m.ya, 1.0);
  const Vec3 bb = h_inv * Vec3(m.xb, m.yb, 1.0);
  if (std::abs(fa.z()) < 1e-12 || std::abs(bb.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  const double d1 = (fa.head<2>() / fa.z() - m.b()).squaredNorm();
  const double d2 = (bb.head<2>() / bb.z() - m.a()).squaredNorm();
  return std::sqrt(0.5 * (d1 + d2));
}

namespace {

std::size_t homography_inliers(const Homography& h, const MatchSet& set, double threshold,
                               std::vector<bool>& mask) {
  const Mat3 h_inv = h.matrix().inverse();
  const auto n = static_cast<std::ptrdiff_t>(set.size());
  std::vector<char> flags(set.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    flags[i] = symmetric_transfer_error(h, h_inv, set.matches[i]) < threshold;
  }
  mask.assign(set.size(), false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    mask[i] = flags[i] != 0;
    count += flags[i] != 0;
  }
  return count;
}

template <typename Model>
std::vector<Match> select(const MatchSet& set, const std::vector<bool>& mask) {
  std::vector<Match> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (mask[i]) out.push_back(set.matches[i]);
  }
  return out;
}

}  // namespace

EstimateResult<Homography> ransac_homography(const MatchSet& matches, const RansacConfig& cfg) {
  cfg.validate();
  const std::size_t n = matches.size();
  if (n < 4) throw Error(ErrorCode::EstimationFailed, "fewer than 4 matches");

  Rng rng = derive_rng(cfg.seed, "ransac-homography");
  EstimateResult<Homography> best;
  std::size_t best_count = 0;
  int required = cfg.max_iterations;
  int it = 0;
  std::vector<bool> mask;
  for (; it < required; ++it) {
    const std::vector<std::size_t> idx = draw_sample(rng, n, 4);
    const std::array<Match, 4> sample = {matches.matches[idx[0]], matches.matches[idx[1]],
                                         matches.matches[idx[2]], matches.matches[idx[3]]};
    Homography h;
    try {
      const std::array<Vec2, 4> src = {sample[0].a(), sample[1].a(), sample[2].a(), sample[3].a()};
      const std::array<Vec2, 4> dst = {sample[0].b(), sample[1].b(), sample[2].b(), sample[3].b()};
      (void)homography_from_4_points(src, dst);  // rejects collinear samples
      h = estimate_homography_dlt(sample);
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = homography_inliers(h, matches, cfg.threshold, mask);
    if (count > best_count) {
      best_count = count;
      best.model = h;
      best.inliers = mask;
      required = adaptive_bound(static_cast<double>(count) / n, 4, cfg);
    }
  }
  best.iterations = it;
  if (best_count < 4) throw Error(ErrorCode::EstimationFailed, "no hypothesis reached 4 inliers");

  try {
    const Homography refit = estimate_homography_dlt(select<Homography>(matches, best.inliers));
    const std::size_t count = homography_inliers(refit, matches, cfg.threshold, mask);
    if (count >= best_count) {
      best.model = refit;
      best.inliers = mask;
    }
  } catch (const Error&) {
    // keep the minimal-sample model
  }
  return best;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 essential_from_pose(const Pose& a_to_b) { return skew(a_to_b.t) * a_to_b.R; }

namespace {

Mat3 project_to_essential(const Mat3& e) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0);
  return svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
}

Mat3 enforce_rank2(const Mat3& f) {
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d = svd.singularValues();
  d(2) = 0.0;
  return svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
}

Mat3 eight_point_normalized(std::span<const Vec2> xa, std::span<const Vec2> xb) {
  const std::size_t n = xa.size();
  const Mat3 ta = hartley_transform(n, [&](std::size_t i) { return xa[i]; });
  const Mat3 tb = hartley_transform(n, [&](std::size_t i) { return xb[i]; });
  Eigen::Matrix<double, Eigen::Dynamic, 9> a(n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = transform(ta, xa[i]);
    const Vec2 q = transform(tb, xb[i]);
    a.row(i) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(), q.y(), p.x(), p.y(), 1.0;
  }
  const Eigen::Matrix<double, 9, 1> f = null_vector(a);
  const Mat3 fn = Eigen::Map<const RowMajor9>(f.data());
  // Enforce rank 2 in the normalized frame, then undo the normalization.
  const Mat3 e = tb.transpose() * enforce_rank2(fn) * ta;
  return project_to_essential(e);
}

struct NormalizedMatches {
  std::vector<Vec2> a;
  std::vector<Vec2> b;
};

NormalizedMatches normalize_all(std::span<const Match> matches, const CameraModel& cam_a, const CameraModel& cam_b) {
  NormalizedMatches out;
  out.a.reserve(matches.size());
  out.b.reserve(matches.size());
  for (const Match& m : matches) {
    out.a.push_back(cam_a.normalize(m.a()));
    out.b.push_back(cam_b.normalize(m.b()));
  }
  return out;
}

}  // namespace

Mat3 estimate_essential_8pt(std::span<const Match> matches, const CameraModel& cam_a, const CameraModel& cam_b) {
  if (matches.size() < 8) throw Error(ErrorCode::InvalidArgument, "8-point algorithm needs at least 8 matches");
  cam_a.validate();
  cam_b.validate();
  const NormalizedMatches nm = normalize_all(matches, cam_a, cam_b);
  return eight_point_normalized(nm.a, nm.b);
}

Mat3 estimate_essential_8pt(const MatchSet& matches, const CameraModel& cam_a, const CameraModel& cam_b) {
  return estimate_essential_8pt(std::span<const Match>(matches.matches), cam_a, cam_b);
}

std::array<Pose, 4> decompose_essential(const Mat3& e) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0) u.col(2) *= -1.0;
  if (v.determinant() < 0) v.col(2) *= -1.0;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 r1 = u * w * v.transpose();
  const Mat3 r2 = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2).normalized();
  return {Pose{r1, t}, Pose{r1, -t}, Pose{r2, t}, Pose{r2, -t}};
}

double epipolar_error_normalized(const Mat3& e, const Vec2& xa, const Vec2& xb) {
  const Vec3 pa(xa.x(), xa.y(), 1.0);
  const Vec3 pb(xb.x(), xb.y(), 1.0);
  const Vec3 line_b = e * pa;
  const Vec3 line_a = e.transpose() * pb;
  const double r = pb.dot(line_b);
  const double na = line_b.head<2>().squaredNorm();
  const double nb = line_a.head<2>().squaredNorm();
  if (na == 0.0 || nb == 0.0) return r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(r * r * (1.0 / na + 1.0 / nb));
}

double epipolar_error(const Mat3& e, const Match& m, const CameraModel& cam_a, const CameraModel& cam_b) {
  return epipolar_error_normalized(e, cam_a.normalize(m.a()), cam_b.normalize(m.b()));
}

namespace {

std::size_t essential_inliers(const Mat3& e, const NormalizedMatches& nm, double threshold,
                              std::vector<bool>& mask) {
  const auto n = static_cast<std::ptrdiff_t>(nm.a.size());
  std::vector<char> flags(nm.a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) flags[i] = epipolar_error_normalized(e, nm.a[i], nm.b[i]) < threshold;
  mask.assign(nm.a.size(), false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < nm.a.size(); ++i) {
    mask[i] = flags[i] != 0;
    count += flags[i] != 0;
  }
  return count;
}

// Linear triangulation with P_a = [I | 0], P_b = [R | t]; returns the point in frame A.
std::optional<Vec3> triangulate(const Pose& pose, const Vec2& xa, const Vec2& xb) {
  Eigen::Matrix<double, 3, 4> pa;
  pa << Mat3::Identity(), Vec3::Zero();
  Eigen::Matrix<double, 3, 4> pb;
  pb << pose.R, pose.t;
  Eigen::Matrix4d a;
  a.row(0) = xa.x() * pa.row(2) - pa.row(0);
  a.row(1) = xa.y() * pa.row(2) - pa.row(1);
  a.row(2) = xb.x() * pb.row(2) - pb.row(0);
  a.row(3) = xb.y() * pb.row(2) - pb.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) < 1e-12) return std::nullopt;
  return Vec3(x.head<3>() / x(3));
}

// Index of the candidate with the most points in front of both cameras, and that count.
std::pair<int, std::size_t> select_by_cheirality(const std::array<Pose, 4>& candidates, const NormalizedMatches& nm,
                                                 const std::vector<bool>& mask) {
  int best = 0;
  std::size_t best_count = 0;
  for (int c = 0; c < 4; ++c) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const std::optional<Vec3> x = triangulate(candidates[c], nm.a[i], nm.b[i]);
      if (x && x->z() > 0.0 && candidates[c].apply(*x).z() > 0.0) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  return {best, best_count};
}

}  // namespace

EstimateResult<Pose> ransac_essential(const MatchSet& matches, const CameraModel& cam_a,
                                      const CameraModel& cam_b, const RansacConfig& cfg) {
  cfg.validate();
  cam_a.validate();
  cam_b.validate();
  const std::size_t n = matches.size();
  if (n < 8) throw Error(ErrorCode::EstimationFailed, "fewer than 8 matches");
  const NormalizedMatches nm = normalize_all(matches.matches, cam_a, cam_b);

  Rng rng = derive_rng(cfg.seed, "ransac-essential");
  Mat3 best_e = Mat3::Zero();
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  bool any_valid = false;
  int required = cfg.max_iterations;
  int it = 0;
  std::vector<bool> mask;
  std::vector<Vec2> sa(8), sb(8);
  for (; it < required; ++it) {
    const std::vector<std::size_t> idx = draw_sample(rng, n, 8);
    for (int k = 0; k < 8; ++k) {
      sa[k] = nm.a[idx[k]];
      sb[k] = nm.b[idx[k]];
    }
    Mat3 e;
    try {
      e = eight_point_normalized(sa, sb);
    } catch (const Error&) {
      continue;
    }
    any_valid = true;
    const std::size_t count = essential_inliers(e, nm, cfg.threshold, mask);
    if (count > best_count) {
      best_count = count;
      best_e = e;
      best_mask = mask;
      required = adaptive_bound(static_cast<double>(count) / n, 8, cfg);
    }
  }
  if (!any_valid) throw Error(ErrorCode::DegenerateConfiguration, "every minimal sample is rank deficient");
  if (best_count < 8) throw Error(ErrorCode::EstimationFailed, "no hypothesis reached 8 inliers");

  if (best_count > 8) {
    try {
      std::vector<Vec2> ia, ib;
      for (std::size_t i = 0; i < n; ++i) {
        if (!best_mask[i]) continue;
        ia.push_back(nm.a[i]);
        ib.push_back(nm.b[i]);
      }
      const Mat3 refit = eight_point_normalized(ia, ib);
      const std::size_t count = essential_inliers(refit, nm, cfg.threshold, mask);
      if (count >= best_count) {
        best_e = refit;
        best_mask = mask;
        best_count = count;
      }
    } catch (const Error&) {
      // keep the minimal-sample model
    }
  }

  const std::array<Pose, 4> candidates = decompose_essential(best_e);
  const auto [index, in_front] = select_by_cheirality(candidates, nm, best_mask);
  if (2 * in_front <= best_count) {
    throw Error(ErrorCode::CheiralityAmbiguous, "no pose places more than half of the inliers in front");
  }
  EstimateResult<Pose> result;
  result.model = candidates[index];
  result.inliers = best_mask;
  result.iterations = it;
  return result;
}

double rotation_error_deg(const Mat3& r_est, const Mat3& r_gt) {
  // atan2 instead of acos: acos loses precision for tiny angles.
  const Mat3 d = r_est.transpose() * r_gt;
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(axis.norm() / 2.0, (d.trace() - 1.0) / 2.0) * 180.0 / std::numbers::pi;
}

double translation_error_deg(const Vec3& t_est, const Vec3& t_gt) {
  const double ng = t_gt.norm();
  const double ne = t_est.norm();
  if (ng == 0.0) return 0.0;
  if (ne == 0.0) return 90.0;
  return std::atan2(t_est.cross(t_gt).norm(), t_est.dot(t_gt)) * 180.0 / std::numbers::pi;
}

double pose_error(const Pose& estimated, const Pose& ground_truth) {
  return std::max(rotation_error_deg(estimated.R, ground_truth.R), translation_error_deg(estimated.t, ground_truth.t));
}

double corner_error(const Homography& h_est, const Homography& h_gt, int width, int height) {
  double sum = 0.0;
  for (const Vec2& c : image_corners(width, height)) {
    sum += (apply_homography(h_est, c) - apply_homography(h_gt, c)).norm();
  }
  return sum / 4.0;
}

}  // namespace mdsyn::estimators
