#include "mdsyn/geometry.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mdsyn {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "camera size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point outside the image");
  }
}

Mat3 CameraModel::K() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Mat3 CameraModel::K_inverse() const {
  Mat3 k;
  k << 1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1;
  return k;
}

Vec2 CameraModel::normalize(const Vec2& pixel) const {
  return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
}

CameraModel CameraModel::scaled(double factor, int new_width, int new_height) const {
  return {fx * factor, fy * factor, cx * factor, cy * factor, new_width, new_height};
}

void Pose::validate(double tol) const {
  if (!R.allFinite() || !t.allFinite()) throw Error(ErrorCode::InvalidArgument, "pose has non-finite entries");
  if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
    throw Error(ErrorCode::InvalidArgument, "rotation is not orthonormal");
  }
  if (std::abs(R.determinant() - 1.0) > tol) {
    throw Error(ErrorCode::InvalidArgument, "rotation determinant is not 1");
  }
}

Pose Pose::inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

Pose Pose::compose(const Pose& other) const { return {R * other.R, R * other.t + t}; }

Pose relative_pose(const Pose& world_to_a, const Pose& world_to_b) {
  world_to_a.validate();
  world_to_b.validate();
  Pose rel;
  rel.R = world_to_b.R * world_to_a.R.transpose();
  rel.t = world_to_b.t - rel.R * world_to_a.t;
  return rel;
}

Mat3 axis_angle(const Vec3& axis, double radians) {
  return Eigen::AngleAxisd(radians, axis.normalized()).toRotationMatrix();
}

DepthMap::DepthMap(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative depth map size");
  if (!std::isfinite(fill) || fill < 0.0f) throw Error(ErrorCode::InvalidArgument, "depth must be finite and >= 0");
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

void DepthMap::set(int x, int y, float v) {
  if (!std::isfinite(v) || v < 0.0f) throw Error(ErrorCode::InvalidArgument, "depth must be finite and >= 0");
  values_[static_cast<std::size_t>(y) * width_ + x] = v;
}

std::optional<double> DepthMap::sample(const Vec2& p) const {
  const double x = p.x();
  const double y = p.y();
  if (!(x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
      if (w == 0.0) continue;
      const float v = at(x0 + dx, y0 + dy);
      if (v <= 0.0f) return std::nullopt;
      acc += w * v;
    }
  }
  return acc;
}

namespace {

std::uint32_t read_u32_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

}  // namespace

DepthMap DepthMap::read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  unsigned char header[16];
  if (!in.read(reinterpret_cast<char*>(header), 16) || std::memcmp(header, "DPTH", 4) != 0) {
    throw Error(ErrorCode::ParseError, "missing DPTH header in " + path.string());
  }
  const std::uint32_t w = read_u32_le(header + 4);
  const std::uint32_t h = read_u32_le(header + 8);
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 4);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw Error(ErrorCode::ParseError, "truncated depth payload in " + path.string());
  }
  for (std::size_t i = 0; i < map.values_.size(); ++i) {
    const float v = std::bit_cast<float>(read_u32_le(bytes.data() + 4 * i));
    if (!std::isfinite(v) || v < 0.0f) throw Error(ErrorCode::ParseError, "invalid depth value in " + path.string());
    map.values_[i] = v;
  }
  return map;
}

void DepthMap::write_raw(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out.write("DPTH", 4);
  write_u32_le(out, static_cast<std::uint32_t>(width_));
  write_u32_le(out, static_cast<std::uint32_t>(height_));
  write_u32_le(out, 0);
  for (float v : values_) write_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

DepthMap DepthMap::read_png16(const std::filesystem::path& path, double scale) {
  const ImageU16 img = mdsyn::read_png16(path);
  DepthMap map(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) map.values_[i] = static_cast<float>(img.data()[i] * scale);
  return map;
}

DepthMap DepthMap::load(const std::filesystem::path& path, double png_scale) {
  if (path.extension() == ".png") return read_png16(path, png_scale);
  return read_raw(path);
}

Homography::Homography(const Mat3& m) {
  if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, "homography has non-finite entries");
  const double norm = m.norm();
  if (norm == 0.0 || std::abs(m.determinant()) <= 1e-300 * norm * norm * norm) {
    throw Error(ErrorCode::InvalidArgument, "homography is singular");
  }
  m_ = m / norm;
  Eigen::Index r = 0, c = 0;
  m_.cwiseAbs().maxCoeff(&r, &c);
  if (m_(r, c) < 0.0) m_ = -m_;
}

Homography Homography::translation(double tx, double ty) {
  Mat3 m = Mat3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::scaling(double sx, double sy) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return Homography(m);
}

Mat3 Homography::affine_scaled() const {
  if (std::abs(m_(2, 2)) < 1e-12) return m_;
  return m_ / m_(2, 2);
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  if (!(std::abs(q.z()) >= 1e-12)) throw Error(ErrorCode::PointAtInfinity, "point maps to infinity");
  return {q.x() / q.z(), q.y() / q.z()};
}

Vec2 apply_homography(const Homography& h, const Vec2& p) { return apply_homography(h.affine_scaled(), p); }

namespace {

double cross2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

bool has_collinear_triple(std::span<const Vec2, 4> p) {
  double scale = 0.0;
  for (const auto& q : p) scale = std::max(scale, q.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * std::max(1.0, scale * scale);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        if (std::abs(cross2(p[i], p[j], p[k])) <= tol) return true;
      }
    }
  }
  return false;
}

}  // namespace

Homography homography_from_4_points(std::span<const Vec2, 4> src, std::span<const Vec2, 4> dst) {
  if (has_collinear_triple(src) || has_collinear_triple(dst)) {
    throw Error(ErrorCode::DegenerateConfiguration, "collinear points in 4-point homography");
  }
  // h33 = 1 parameterisation; valid for non-degenerate quadrilaterals.
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x(), y = src[i].y(), u = dst[i].x(), v = dst[i].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  Mat3 m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return Homography(m);
}

std::array<Vec2, 4> image_corners(int width, int height) {
  const double w = width - 1.0;
  const double h = height - 1.0;
  return {Vec2(0, 0), Vec2(w, 0), Vec2(w, h), Vec2(0, h)};
}

std::optional<Vec2> gt_correspondence(const DepthMap& depth_a, const CameraModel& cam_a,
                                      const CameraModel& cam_b, const Pose& a_to_b,
                                      const DepthMap& depth_b, const Vec2& p, double depth_tol) {
  if (!(depth_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "depth tolerance must be positive");
  if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= depth_a.width() - 1 && p.y() <= depth_a.height() - 1)) {
    throw Error(ErrorCode::InvalidArgument, "query pixel outside image A");
  }
  const std::optional<double> za = depth_a.sample(p);
  if (!za) throw Error(ErrorCode::InvalidDepth, "no valid depth at query pixel");

  const Vec2 n = cam_a.normalize(p);
  const Vec3 xa(n.x() * *za, n.y() * *za, *za);
  const Vec3 xb = a_to_b.apply(xa);
  if (!(xb.z() > 0.0)) return std::nullopt;
  const Vec2 q(cam_b.fx * xb.x() / xb.z() + cam_b.cx, cam_b.fy * xb.y() / xb.z() + cam_b.cy);
  const std::optional<double> zb = depth_b.sample(q);
  if (!zb) return std::nullopt;
  if (std::abs(*zb - xb.z()) > depth_tol * xb.z()) return std::nullopt;
  return q;
}

}  // namespace mdsyn
