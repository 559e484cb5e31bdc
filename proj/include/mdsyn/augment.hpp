#pragma once

#include <cstdint>

#include "mdsyn/geometry.hpp"
#include "mdsyn/image.hpp"
#include "mdsyn/random.hpp"

namespace mdsyn::augment {

struct WarpConfig {
  double perturbation = 0.15;  // corner offset bound, fraction of min(width, height)
  double rotation_deg = 15.0;  // rotation drawn from [-r, r]
  double scale_range = 0.15;   // scale drawn from [1 - s, 1 + s]
  double translation = 0.1;    // shift drawn from [-t, t] * (width, height)
  std::uint64_t seed = 0;

  void validate() const;
};

// Components of a sampled warp; `total` = similarity ∘ perturbation.
struct SampledWarp {
  Homography perturbation;
  Homography similarity;
  Homography total;
  double scale = 1.0;
};

// Samples with the engine keyed by cfg.seed.
Homography sample_homography(const WarpConfig& cfg, int width, int height);
// Same distribution, caller-supplied stream; exposes the decomposition.
// Throws DegenerateSample after 100 non-convex corner draws.
SampledWarp sample_warp(const WarpConfig& cfg, int width, int height, Rng& rng);

// Inverse-mapped bilinear warp; pixels without a source are 0.
ImageF warp_image(const ImageF& image, const Homography& h, int out_width, int out_height);
ImageU8 warp_image(const ImageU8& image, const Homography& h, int out_width, int out_height);

struct Resized {
  ImageF image;
  double scale = 1.0;
};

// Output pixel x samples input pixel x / scale (clamped to the last pixel), so
// coordinates rescale exactly by `scale`. Downscaling prefilters with a Gaussian
// to limit aliasing.
Resized resize_long_side(const ImageF& image, int target);
ImageF resize_to(const ImageF& image, double scale, int out_width, int out_height);

// Long side scaled to `target`, then zero-padded after the content to target x target.
ImageF resize_pad_square(const ImageF& image, int target);

// Rescales a homography between images resized by scale_a (source) and scale_b (destination).
Homography rescale_homography(const Homography& h, double scale_a, double scale_b);

// floor(v + 0.5)
int round_half_up(double v);

}  // namespace mdsyn::augment
