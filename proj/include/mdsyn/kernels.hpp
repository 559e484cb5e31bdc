#pragma once

// Per-pixel image kernels. The mdsyn::kernels versions parallelize over rows
// with OpenMP; every output pixel is written by exactly one thread and no
// kernel performs a floating-point reduction across threads, so results do
// not depend on the thread count. mdsyn::serial holds straightforward
// single-threaded references used by the tests and the benchmark.

#include "mdsyn/geometry.hpp"
#include "mdsyn/image.hpp"

namespace mdsyn {

using GridD = Image<double>;

namespace kernels {

// out(x, y) = bilinear(src, map(x, y)); zero outside [0, w-1] x [0, h-1].
// `out_to_src` maps output pixel centres to source pixel centres.
ImageF warp_bilinear(const ImageF& src, const Mat3& out_to_src, int out_width, int out_height);

// log(I + eps), elementwise.
GridD log_intensity(const ImageF& gray, double eps);

// Signed per-pixel event count floor(|L1 - ref| / C) * sign, with the
// reference level advanced in place by count * C.
Image<int> event_counts(GridD& reference, const GridD& target, double contrast);

// Harris response det(M) - k trace(M)^2 of the Gaussian-weighted structure tensor.
ImageF harris_response(const ImageF& gray, double sigma, double k);

// Separable Gaussian blur with a (2 * radius + 1) tap kernel; borders clamp.
GridD gaussian_blur(const GridD& src, double sigma, int radius);

// Local SSIM for every fully-contained window of an 11x11 (sigma 1.5) Gaussian.
// Output is (w - 10) x (h - 10).
GridD ssim_map(const ImageU8& a, const ImageU8& b);

}  // namespace kernels

namespace serial {

ImageF warp_bilinear(const ImageF& src, const Mat3& out_to_src, int out_width, int out_height);
GridD log_intensity(const ImageF& gray, double eps);
Image<int> event_counts(GridD& reference, const GridD& target, double contrast);
ImageF harris_response(const ImageF& gray, double sigma, double k);
GridD gaussian_blur(const GridD& src, double sigma, int radius);
// Direct 2D windowed evaluation (no separable filtering).
GridD ssim_map(const ImageU8& a, const ImageU8& b);

}  // namespace serial

// Normalized 1D Gaussian taps, length 2 * radius + 1.
std::vector<double> gaussian_taps(double sigma, int radius);

}  // namespace mdsyn
