#include "mdsyn/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mdsyn/kernels.hpp"

namespace mdsyn::augment {

void WarpConfig::validate() const {
  if (!(perturbation >= 0.0 && perturbation < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "perturbation fraction must lie in [0, 0.5)");
  }
  if (!(rotation_deg >= 0.0) || !(scale_range >= 0.0 && scale_range < 1.0) || !(translation >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "warp ranges must be non-negative (scale range below 1)");
  }
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

namespace {

bool is_convex(const std::array<Vec2, 4>& q) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2 e1 = q[(i + 1) % 4] - q[i];
    const Vec2 e2 = q[(i + 2) % 4] - q[(i + 1) % 4];
    const double cross = e1.x() * e2.y() - e1.y() * e2.x();
    if (cross == 0.0) return false;
    const int s = cross > 0.0 ? 1 : -1;
    if (sign != 0 && s != sign) return false;
    sign = s;
  }
  return true;
}

Mat3 translation_matrix(double tx, double ty) {
  Mat3 m = Mat3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

}  // namespace

SampledWarp sample_warp(const WarpConfig& cfg, int width, int height, Rng& rng) {
  cfg.validate();
  if (width < 2 || height < 2) throw Error(ErrorCode::InvalidArgument, "warp frame must be at least 2x2");
  SampledWarp out;

  const double bound = cfg.perturbation * std::min(width, height);
  if (bound > 0.0) {
    const std::array<Vec2, 4> corners = image_corners(width, height);
    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
      std::array<Vec2, 4> moved;
      for (int i = 0; i < 4; ++i) {
        const double dx = uniform(rng, -bound, bound);
        const double dy = uniform(rng, -bound, bound);
        moved[i] = corners[i] + Vec2(dx, dy);
      }
      if (!is_convex(moved)) continue;
      out.perturbation = homography_from_4_points(corners, moved);
      found = true;
    }
    if (!found) throw Error(ErrorCode::DegenerateSample, "no convex corner perturbation in 100 draws");
  }

  const double theta = uniform(rng, -cfg.rotation_deg, cfg.rotation_deg) * std::numbers::pi / 180.0;
  out.scale = uniform(rng, 1.0 - cfg.scale_range, 1.0 + cfg.scale_range);
  const double tx = uniform(rng, -cfg.translation, cfg.translation) * width;
  const double ty = uniform(rng, -cfg.translation, cfg.translation) * height;
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  Mat3 rs = Mat3::Identity();
  rs(0, 0) = out.scale * std::cos(theta);
  rs(0, 1) = -out.scale * std::sin(theta);
  rs(1, 0) = out.scale * std::sin(theta);
  rs(1, 1) = out.scale * std::cos(theta);
  out.similarity = Homography(translation_matrix(cx + tx, cy + ty) * rs * translation_matrix(-cx, -cy));
  out.total = out.similarity.compose(out.perturbation);
  return out;
}

Homography sample_homography(const WarpConfig& cfg, int width, int height) {
  Rng rng = derive_rng(cfg.seed, "homography");
  return sample_warp(cfg, width, height, rng).total;
}

ImageF warp_image(const ImageF& image, const Homography& h, int out_width, int out_height) {
  return kernels::warp_bilinear(image, h.inverse().affine_scaled(), out_width, out_height);
}

ImageU8 warp_image(const ImageU8& image, const Homography& h, int out_width, int out_height) {
  return to_u8(warp_image(to_float(image), h, out_width, out_height));
}

ImageF resize_to(const ImageF& image, double scale, int out_width, int out_height) {
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "resize scale must be positive");
  if (scale == 1.0 && out_width == image.width() && out_height == image.height()) return image;
  ImageF source = image;
  if (scale < 1.0) {
    const double sigma = 0.5 * std::sqrt(1.0 / (scale * scale) - 1.0);
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    for (int c = 0; c < image.channels(); ++c) {
      GridD plane(image.width(), image.height(), 1);
      for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) plane(x, y) = image(x, y, c);
      const GridD blurred = kernels::gaussian_blur(plane, sigma, radius);
      for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) source(x, y, c) = static_cast<float>(blurred(x, y));
    }
  }
  // Bilinear with edge clamping: the last output row/column may land up to half
  // a source pixel beyond the last source pixel centre.
  ImageF out(out_width, out_height, image.channels());
  const int w = image.width(), h = image.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_height; ++y) {
    const double sy = std::clamp(y / scale, 0.0, static_cast<double>(h - 1));
    const int y0 = std::min(static_cast<int>(sy), std::max(h - 2, 0));
    const double fy = sy - y0;
    const int y1 = std::min(y0 + 1, h - 1);
    for (int x = 0; x < out_width; ++x) {
      const double sx = std::clamp(x / scale, 0.0, static_cast<double>(w - 1));
      const int x0 = std::min(static_cast<int>(sx), std::max(w - 2, 0));
      const double fx = sx - x0;
      const int x1 = std::min(x0 + 1, w - 1);
      for (int c = 0; c < image.channels(); ++c) {
        const double top = (1 - fx) * source(x0, y0, c) + fx * source(x1, y0, c);
        const double bottom = (1 - fx) * source(x0, y1, c) + fx * source(x1, y1, c);
        out(x, y, c) = static_cast<float>((1 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

Resized resize_long_side(const ImageF& image, int target) {
  if (target <= 0) throw Error(ErrorCode::InvalidArgument, "resize target must be positive");
  const int long_side = std::max(image.width(), image.height());
  if (long_side == 0) throw Error(ErrorCode::InvalidArgument, "cannot resize an empty image");
  if (long_side == target) return {image, 1.0};
  const double scale = static_cast<double>(target) / long_side;
  const int w = image.width() >= image.height() ? target : round_half_up(image.width() * scale);
  const int h = image.height() > image.width() ? target : round_half_up(image.height() * scale);
  return {resize_to(image, scale, std::max(w, 1), std::max(h, 1)), scale};
}

ImageF resize_pad_square(const ImageF& image, int target) {
  const Resized content = resize_long_side(image, target);
  ImageF out(target, target, image.channels(), 0.0f);
  for (int y = 0; y < content.image.height(); ++y) {
    for (int x = 0; x < content.image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) out(x, y, c) = content.image(x, y, c);
    }
  }
  return out;
}

Homography rescale_homography(const Homography& h, double scale_a, double scale_b) {
  Mat3 sa_inv = Mat3::Identity();
  sa_inv(0, 0) = sa_inv(1, 1) = 1.0 / scale_a;
  Mat3 sb = Mat3::Identity();
  sb(0, 0) = sb(1, 1) = scale_b;
  return Homography(sb * h.matrix() * sa_inv);
}

}  // namespace mdsyn::augment
