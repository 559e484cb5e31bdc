#include <algorithm>
#include <cmath>

#include "mdsyn/kernels.hpp"

namespace mdsyn::serial {

namespace {

double bilinear(const ImageF& src, double sx, double sy, int c) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double ax = sx - x0;
  const double ay = sy - y0;
  auto tap = [&](int x, int y) -> double {
    return src(std::min(x, src.width() - 1), std::min(y, src.height() - 1), c);
  };
  return (1 - ay) * ((1 - ax) * tap(x0, y0) + ax * tap(x0 + 1, y0)) +
         ay * ((1 - ax) * tap(x0, y0 + 1) + ax * tap(x0 + 1, y0 + 1));
}

}  // namespace

ImageF warp_bilinear(const ImageF& src, const Mat3& out_to_src, int out_width, int out_height) {
  ImageF out(out_width, out_height, src.channels(), 0.0f);
  if (src.empty()) return out;
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Vec3 q = out_to_src * Vec3(x, y, 1.0);
      if (std::abs(q.z()) < 1e-12) continue;
      double sx = q.x() / q.z();
      double sy = q.y() / q.z();
      if (sx < -1e-6 || sy < -1e-6 || sx > src.width() - 1 + 1e-6 || sy > src.height() - 1 + 1e-6) continue;
      sx = std::clamp(sx, 0.0, src.width() - 1.0);
      sy = std::clamp(sy, 0.0, src.height() - 1.0);
      for (int c = 0; c < src.channels(); ++c) out(x, y, c) = static_cast<float>(bilinear(src, sx, sy, c));
    }
  }
  return out;
}

GridD log_intensity(const ImageF& gray, double eps) {
  GridD out(gray.width(), gray.height(), gray.channels());
  for (std::size_t i = 0; i < gray.size(); ++i) out.data()[i] = std::log(static_cast<double>(gray.data()[i]) + eps);
  return out;
}

Image<int> event_counts(GridD& reference, const GridD& target, double contrast) {
  Image<int> counts(target.width(), target.height(), 1, 0);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const int polarity = target.data()[i] >= reference.data()[i] ? 1 : -1;
    const double magnitude = std::abs(target.data()[i] - reference.data()[i]);
    const auto n = static_cast<int>(std::floor(magnitude / contrast));
    counts.data()[i] = polarity * n;
    reference.data()[i] += polarity * static_cast<double>(n) * contrast;
  }
  return counts;
}

GridD gaussian_blur(const GridD& src, double sigma, int radius) {
  const std::vector<double> taps = gaussian_taps(sigma, radius);
  const int w = src.width();
  const int h = src.height();
  GridD out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -radius; j <= radius; ++j) {
        double row = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          row += taps[i + radius] * src(std::clamp(x + i, 0, w - 1), std::clamp(y + j, 0, h - 1));
        }
        acc += taps[j + radius] * row;
      }
      out(x, y) = acc;
    }
  }
  return out;
}

ImageF harris_response(const ImageF& gray, double sigma, double k) {
  const int w = gray.width();
  const int h = gray.height();
  GridD ixx(w, h, 1), iyy(w, h, 1), ixy(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      static constexpr int kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          const double v = gray(std::clamp(x + i, 0, w - 1), std::clamp(y + j, 0, h - 1));
          gx += kSobelX[j + 1][i + 1] * v;
          gy += kSobelX[i + 1][j + 1] * v;
        }
      }
      gx /= 8.0;
      gy /= 8.0;
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
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tr = sxx(x, y) + syy(x, y);
      out(x, y) = static_cast<float>(sxx(x, y) * syy(x, y) - sxy(x, y) * sxy(x, y) - k * tr * tr);
    }
  }
  return out;
}

GridD ssim_map(const ImageU8& a, const ImageU8& b) {
  constexpr int kRadius = 5;
  const double c1 = std::pow(0.01 * 255, 2);
  const double c2 = std::pow(0.03 * 255, 2);
  const std::vector<double> taps = gaussian_taps(1.5, kRadius);
  const int ow = a.width() - 2 * kRadius;
  const int oh = a.height() - 2 * kRadius;
  if (ow <= 0 || oh <= 0) return GridD(0, 0, 1);
  GridD out(ow, oh, 1);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double mu_a = 0, mu_b = 0;
      for (int j = 0; j <= 2 * kRadius; ++j) {
        for (int i = 0; i <= 2 * kRadius; ++i) {
          const double wgt = taps[i] * taps[j];
          mu_a += wgt * a(x + i, y + j);
          mu_b += wgt * b(x + i, y + j);
        }
      }
      // Central moments computed about the local means.
      double var_a = 0, var_b = 0, cov = 0;
      for (int j = 0; j <= 2 * kRadius; ++j) {
        for (int i = 0; i <= 2 * kRadius; ++i) {
          const double wgt = taps[i] * taps[j];
          const double da = a(x + i, y + j) - mu_a;
          const double db = b(x + i, y + j) - mu_b;
          var_a += wgt * da * da;
          var_b += wgt * db * db;
          cov += wgt * da * db;
        }
      }
      const double luminance = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
      const double structure = (2 * cov + c2) / (var_a + var_b + c2);
      out(x, y) = luminance * structure;
    }
  }
  return out;
}

}  // namespace mdsyn::serial
