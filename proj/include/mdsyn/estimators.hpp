#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mdsyn/geometry.hpp"

namespace mdsyn::estimators {

struct RansacConfig {
  double threshold = 3.0;  // pixels for homography, normalized units for essential
  int max_iterations = 10000;
  double confidence = 0.9999;
  std::uint64_t seed = 0;

  void validate() const;
};

// Defaults: 3 px for homographies, 5e-4 normalized for essential matrices.
RansacConfig default_homography_ransac();
RansacConfig default_essential_ransac();

template <typename Model>
struct EstimateResult {
  Model model;
  std::vector<bool> inliers;
  int iterations = 0;

  std::size_t inlier_count() const {
    std::size_t n = 0;
    for (bool b : inliers) n += b;
    return n;
  }
};

// Hartley-normalized DLT over all matches. Throws DegenerateConfiguration when
// the design matrix rank is below 8 (relative tolerance 1e-10) and InvalidArgument
// for fewer than 4 matches.
Homography estimate_homography_dlt(std::span<const Match> matches);
Homography estimate_homography_dlt(const MatchSet& matches);

// sqrt((|H a - b|^2 + |H^-1 b - a|^2) / 2); infinite when either side maps to infinity.
double symmetric_transfer_error(const Homography& h, const Mat3& h_inv, const Match& m);

// 4-point RANSAC with adaptive stopping and a final least-squares refit.
// Throws EstimationFailed for fewer than 4 matches or no 4-inlier hypothesis.
EstimateResult<Homography> ransac_homography(const MatchSet& matches, const RansacConfig& cfg);

// Normalized 8-point algorithm in camera coordinates, projected to singular
// values (1/sqrt(2), 1/sqrt(2), 0).
Mat3 estimate_essential_8pt(std::span<const Match> matches, const CameraModel& cam_a, const CameraModel& cam_b);
Mat3 estimate_essential_8pt(const MatchSet& matches, const CameraModel& cam_a, const CameraModel& cam_b);

// [t]x R
Mat3 essential_from_pose(const Pose& a_to_b);
Mat3 skew(const Vec3& v);

// The four (R, t) factorizations of E, t unit-norm.
std::array<Pose, 4> decompose_essential(const Mat3& e);

// Symmetric epipolar distance in normalized camera coordinates.
double epipolar_error(const Mat3& e, const Match& m, const CameraModel& cam_a, const CameraModel& cam_b);
double epipolar_error_normalized(const Mat3& e, const Vec2& xa, const Vec2& xb);

// RANSAC over 8-point hypotheses; the pose is selected by cheirality over the inliers.
// Throws EstimationFailed, CheiralityAmbiguous, or DegenerateConfiguration when
// every minimal sample is rank deficient (e.g. zero baseline).
EstimateResult<Pose> ransac_essential(const MatchSet& matches, const CameraModel& cam_a,
                                      const CameraModel& cam_b, const RansacConfig& cfg);

// Degrees.
double rotation_error_deg(const Mat3& r_est, const Mat3& r_gt);
// Degrees; 0 when the ground-truth translation has zero norm.
double translation_error_deg(const Vec3& t_est, const Vec3& t_gt);
// max(rotation error, translation-direction error), degrees.
double pose_error(const Pose& estimated, const Pose& ground_truth);

// Mean distance between the four image corners mapped by each homography.
double corner_error(const Homography& h_est, const Homography& h_gt, int width, int height);

}  // namespace mdsyn::estimators
