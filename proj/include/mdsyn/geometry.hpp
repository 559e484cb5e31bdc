#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdsyn/error.hpp"
#include "mdsyn/image.hpp"

namespace mdsyn {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole intrinsics. No distortion.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws InvalidArgument when fx, fy <= 0 or the principal point is off-image.
  void validate() const;
  Mat3 K() const;
  Mat3 K_inverse() const;
  // Pixel -> normalized camera coordinates (z = 1).
  Vec2 normalize(const Vec2& pixel) const;
  // Intrinsics of the same camera after isotropic image scaling about the origin pixel.
  CameraModel scaled(double factor, int new_width, int new_height) const;
};

// Rigid world-to-camera transform: x_cam = R * x_world + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static Pose identity() { return {}; }
  // Throws InvalidArgument unless R is orthonormal with det 1 (tolerance 1e-9).
  void validate(double tol = 1e-9) const;
  Pose inverse() const;
  // (this ∘ other): applies other first.
  Pose compose(const Pose& other) const;
  Vec3 apply(const Vec3& x) const { return R * x + t; }
};

// T_AB mapping camera-A coordinates into camera B given both world-to-camera poses.
Pose relative_pose(const Pose& world_to_a, const Pose& world_to_b);

// Rotation about a unit axis by an angle in radians.
Mat3 axis_angle(const Vec3& axis, double radians);

// Dense z-depth. 0 marks invalid samples.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, float fill = 0.0f);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  float at(int x, int y) const noexcept { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, float v);
  const std::vector<float>& values() const noexcept { return values_; }

  // Bilinear lookup at a continuous pixel position. Empty when outside
  // [0, w-1] x [0, h-1] or when any contributing tap is invalid.
  std::optional<double> sample(const Vec2& p) const;

  // Raw format: "DPTH", u32 width, u32 height, u32 reserved, then float32 LE row-major.
  static DepthMap read_raw(const std::filesystem::path& path);
  void write_raw(const std::filesystem::path& path) const;
  // 16-bit PNG; depth = stored value * scale (default: millimetres to metres).
  static DepthMap read_png16(const std::filesystem::path& path, double scale = 1e-3);
  // Dispatches on extension: .png -> 16-bit PNG, anything else -> raw.
  static DepthMap load(const std::filesystem::path& path, double png_scale = 1e-3);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

// Projective map in canonical scale: unit Frobenius norm, largest-magnitude
// entry positive. Two homographies of the same scale class compare equal
// entrywise after construction.
class Homography {
 public:
  Homography() : Homography(Mat3::Identity()) {}
  explicit Homography(const Mat3& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);
  static Homography scaling(double sx, double sy);

  const Mat3& matrix() const noexcept { return m_; }
  // The same map scaled so that entry (2,2) is 1 (falls back to canonical when that entry is ~0).
  Mat3 affine_scaled() const;
  Homography inverse() const;
  // (this ∘ other): applies other first.
  Homography compose(const Homography& other) const { return Homography(m_ * other.m_); }

  friend bool operator==(const Homography&, const Homography&) = default;

 private:
  Mat3 m_;
};

// Dehomogenized H * [x, y, 1]. Throws PointAtInfinity when |w| < 1e-12.
Vec2 apply_homography(const Homography& h, const Vec2& p);
Vec2 apply_homography(const Mat3& h, const Vec2& p);

// Exact homography through four point correspondences. Throws DegenerateConfiguration
// when three of the points are collinear.
Homography homography_from_4_points(std::span<const Vec2, 4> src, std::span<const Vec2, 4> dst);

// Corner pixel centres (0,0), (w-1,0), (w-1,h-1), (0,h-1).
std::array<Vec2, 4> image_corners(int width, int height);

struct Match {
  double xa = 0, ya = 0, xb = 0, yb = 0;
  double score = 1.0;

  Vec2 a() const { return {xa, ya}; }
  Vec2 b() const { return {xb, yb}; }
  friend bool operator==(const Match&, const Match&) = default;
};

struct MatchSet {
  std::string image_a;
  std::string image_b;
  std::vector<Match> matches;

  std::size_t size() const noexcept { return matches.size(); }
  bool empty() const noexcept { return matches.empty(); }
  friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

// Project pixel p of camera A through its depth into camera B and keep the result
// only when it lands inside B and depthB agrees within depth_tol relative error.
// Throws InvalidDepth when depthA is 0 at p.
std::optional<Vec2> gt_correspondence(const DepthMap& depth_a, const CameraModel& cam_a,
                                      const CameraModel& cam_b, const Pose& a_to_b,
                                      const DepthMap& depth_b, const Vec2& p,
                                      double depth_tol = 0.05);

}  // namespace mdsyn
