#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdsyn/geometry.hpp"
#include "mdsyn/image.hpp"

namespace mdsyn::matcher {

inline constexpr int kDefaultMaxKeypoints = 2048;
inline constexpr int kDescriptorSize = 128;
// Half-width of the sampled patch including the gradient support.
inline constexpr int kPatchRadius = 9;

struct Keypoint {
  int x = 0;
  int y = 0;
  double response = 0.0;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct DetectorConfig {
  int max_keypoints = kDefaultMaxKeypoints;
  int nms_radius = 4;
  int border = kPatchRadius;
  double harris_k = 0.04;
  double sigma = 1.0;
  double relative_threshold = 1e-3;  // fraction of the strongest response
};

// Harris corners after non-maximum suppression, strongest first; ties resolve by (y, x).
std::vector<Keypoint> detect(const ImageF& gray, const DetectorConfig& cfg = {});

using Descriptor = std::array<float, kDescriptorSize>;

// 16x16 patch around the keypoint, mean-subtracted and contrast-normalized, pooled
// into 4x4 cells of 8 unsigned gradient-orientation bins, then unit-normalized.
// Throws BorderKeypoint within kPatchRadius of the border and FlatPatch for a constant patch.
Descriptor describe(const ImageF& gray, const Keypoint& kp);

struct Features {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
};

// detect + describe, dropping keypoints that cannot be described.
Features extract(const ImageF& gray, const DetectorConfig& cfg = {});

struct IndexMatch {
  int a = 0;
  int b = 0;
  double distance = 0.0;

  friend bool operator==(const IndexMatch&, const IndexMatch&) = default;
};

// Mutual nearest neighbours under Euclidean distance that also pass the ratio
// test d1 < ratio * d2 in both directions (a side with one descriptor always passes).
// Sorted by index in A.
std::vector<IndexMatch> mutual_nn(std::span<const Descriptor> a, std::span<const Descriptor> b, double ratio = 0.9);

// Score = 1 - distance / 2.
MatchSet match_mutual_nn(const Features& a, const Features& b, double ratio = 0.9);

struct BaselineConfig {
  DetectorConfig detector;
  double ratio = 0.9;
};

// Full classical pipeline on two grayscale images.
MatchSet match_images(const ImageF& a, const ImageF& b, const BaselineConfig& cfg = {});
std::string baseline_identity(const BaselineConfig& cfg);

// Correspondence files: "MDSYN-MATCHES v1 <imageA> <imageB>" then "xA yA xB yB score" lines.
struct ImageBounds {
  int width_a, height_a, width_b, height_b;
};
MatchSet ingest_matches(const std::filesystem::path& path, const std::optional<ImageBounds>& bounds = std::nullopt);
MatchSet parse_matches(std::string_view text, const std::optional<ImageBounds>& bounds = std::nullopt);
void write_matches(const std::filesystem::path& path, const MatchSet& matches);
std::string format_matches(const MatchSet& matches);

}  // namespace mdsyn::matcher
