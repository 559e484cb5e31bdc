#include "mdsyn/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mdsyn {

std::vector<double> gaussian_taps(double sigma, int radius) {
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[i + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace kernels {

namespace {

// Snap coordinates that fall within rounding distance of the border back inside.
inline bool snap_inside(double& v, int extent) {
  constexpr double kSlack = 1e-6;
  if (v < -kSlack || v > extent - 1 + kSlack) return false;
  v = std::clamp(v, 0.0, static_cast<double>(extent - 1));
  return true;
}

}  // namespace

ImageF warp_bilinear(const ImageF& src, const Mat3& out_to_src, int out_width, int out_height) {
  const int channels = src.channels();
  ImageF out(out_width, out_height, channels, 0.0f);
  if (src.empty()) return out;
  const int sw = src.width();
  const int sh = src.height();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_height; ++y) {
    // Row start and per-column increment of the homogeneous source coordinate.
    const Vec3 base = out_to_src * Vec3(0.0, y, 1.0);
    const Vec3 step = out_to_src.col(0);
    for (int x = 0; x < out_width; ++x) {
      const Vec3 q = base + static_cast<double>(x) * step;
      if (std::abs(q.z()) < 1e-12) continue;
      double sx = q.x() / q.z();
      double sy = q.y() / q.z();
      if (!snap_inside(sx, sw) || !snap_inside(sy, sh)) continue;
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, sw - 1);
      const int y1 = std::min(y0 + 1, sh - 1);
      const double ax = sx - x0;
      const double ay = sy - y0;
      for (int c = 0; c < channels; ++c) {
        const double top = (1.0 - ax) * src(x0, y0, c) + ax * src(x1, y0, c);
        const double bottom = (1.0 - ax) * src(x0, y1, c) + ax * src(x1, y1, c);
        out(x, y, c) = static_cast<float>((1.0 - ay) * top + ay * bottom);
      }
    }
  }
  return out;
}

GridD log_intensity(const ImageF& gray, double eps) {
  GridD out(gray.width(), gray.height(), gray.channels());
  const auto n = static_cast<std::ptrdiff_t>(gray.size());
  const float* in = gray.data().data();
  double* dst = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = std::log(static_cast<double>(in[i]) + eps);
  return out;
}

Image<int> event_counts(GridD& reference, const GridD& target, double contrast) {
  Image<int> counts(target.width(), target.height(), 1, 0);
  const auto n = static_cast<std::ptrdiff_t>(target.size());
  double* ref = reference.data().data();
  const double* tgt = target.data().data();
  int* cnt = counts.data().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double delta = tgt[i] - ref[i];
    const double k = std::floor(std::abs(delta) / contrast);
    if (k >= 1.0) {
      const int polarity = delta > 0.0 ? 1 : -1;
      cnt[i] = polarity * static_cast<int>(k);
      ref[i] += polarity * k * contrast;
    }
  }
  return counts;
}

GridD gaussian_blur(const GridD& src, double sigma, int radius) {
  const std::vector<double> taps = gaussian_taps(sigma, radius);
  const int w = src.width();
  const int h = src.height();
  GridD tmp(w, h, 1);
  GridD out(w, h, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += taps[i + radius] * src(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += taps[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  }
  return out;
}

ImageF harris_response(const ImageF& gray, double sigma, double k) {
  const int w = gray.width();
  const int h = gray.height();
  GridD ixx(w, h, 1), iyy(w, h, 1), ixy(w, h, 1);
  auto px = [&](int x, int y) -> double { return gray(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Sobel, normalized to unit gain on a linear ramp.
      const double gx = ((px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                         (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1))) / 8.0;
      const double gy = ((px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                         (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1))) / 8.0;
      ixx(x, y) = gx * gx;
      iyy(x, y) = gy * gy;
      ixy(x, y) = gx * gy;
    }
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const GridD sxx = gaussian_blur(ixx, sigma, radius);
  const GridD syy = gaussian_blur(iyy, sigma, radius);
  const GridD sxy = gaussian_blur(ixy, sigma, radius);
  ImageF out(w, h, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double det = sxx(x, y) * syy(x, y) - sxy(x, y) * sxy(x, y);
      const double tr = sxx(x, y) + syy(x, y);
      out(x, y) = static_cast<float>(det - k * tr * tr);
    }
  }
  return out;
}

GridD ssim_map(const ImageU8& a, const ImageU8& b) {
  constexpr int kRadius = 5;
  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
  const std::vector<double> taps = gaussian_taps(1.5, kRadius);
  const int w = a.width();
  const int h = a.height();
  const int ow = w - 2 * kRadius;
  const int oh = h - 2 * kRadius;
  if (ow <= 0 || oh <= 0) return GridD(0, 0, 1);

  // Horizontal pass over full rows, "valid" columns only. Five moments per pixel.
  constexpr int kMoments = 5;
  GridD horiz(ow, h, kMoments);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double m[kMoments] = {0, 0, 0, 0, 0};
      for (int i = 0; i <= 2 * kRadius; ++i) {
        const double va = a(x + i, y);
        const double vb = b(x + i, y);
        const double t = taps[i];
        m[0] += t * va;
        m[1] += t * vb;
        m[2] += t * va * va;
        m[3] += t * vb * vb;
        m[4] += t * va * vb;
      }
      for (int c = 0; c < kMoments; ++c) horiz(x, y, c) = m[c];
    }
  }
  GridD out(ow, oh, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double m[kMoments] = {0, 0, 0, 0, 0};
      for (int i = 0; i <= 2 * kRadius; ++i) {
        for (int c = 0; c < kMoments; ++c) m[c] += taps[i] * horiz(x, y + i, c);
      }
      const double mu_a = m[0], mu_b = m[1];
      const double var_a = m[2] - mu_a * mu_a;
      const double var_b = m[3] - mu_b * mu_b;
      const double cov = m[4] - mu_a * mu_b;
      out(x, y) = ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                  ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
  }
  return out;
}

}  // namespace kernels
}  // namespace mdsyn
