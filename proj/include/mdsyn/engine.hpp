#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdsyn/estimators.hpp"
#include "mdsyn/manifest.hpp"
#include "mdsyn/matcher.hpp"
#include "mdsyn/random.hpp"

namespace mdsyn::engine {

// ---------------------------------------------------------------------------
// Cross-modal pairing
// ---------------------------------------------------------------------------

// Number of cross-modal pairs produced from `rgb_pairs` source pairs and K modalities.
std::uint64_t cross_modal_pair_count(std::uint64_t rgb_pairs, std::uint64_t modality_count);

// For every RGB pair {A0, B0} and every modality i, emits {A0, Bi} and {Ai, B0}
// carrying the source pair's label unchanged. With no modalities the input
// pairs are returned as they are. Throws MissingModality listing every absent
// generated image, UnknownModality for unregistered tags.
PairManifest build_cross_modal_pairs(const PairManifest& manifest, std::span<const std::string> modalities);

// The generated counterpart of `source_id` in `modality`, if registered.
const ImageEntry* find_generated(const PairManifest& manifest, std::string_view source_id, std::string_view modality);

// ---------------------------------------------------------------------------
// Generator plugins
// ---------------------------------------------------------------------------

// External generator: a shell command run once per batch. The template must contain
// {input_dir} and {output_dir}; every input file <n>.png must appear in the output
// directory under the same name.
struct GeneratorSpec {
  std::string name;
  std::string version;
  std::string modality;
  std::string command;
  int batch_size = 16;
  double timeout_seconds = 600.0;
  // When > 0, inputs are padded to square_size x square_size before the call and
  // outputs are cropped and resized back to the source dimensions.
  int square_size = 0;

  void validate() const;
  static GeneratorSpec from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;
};

struct GeneratedImage {
  std::string source_id;
  std::filesystem::path path;  // content-addressed file under the cache root
};

// Runs the generator over `images` with up to `workers` concurrent batches.
// Throws GeneratorFailed (nonzero exit, timeout) with the captured output,
// IncompleteOutput for missing, unreadable or mis-sized outputs.
std::vector<GeneratedImage> run_generator(const GeneratorSpec& spec, const PairManifest& manifest,
                                          std::span<const ImageEntry> images, const std::filesystem::path& cache_root,
                                          int workers = 1);

// Copy of the manifest with one generated image per source, inheriting scene,
// camera, pose and depth labels; records the generator.
PairManifest register_generated(const PairManifest& manifest, const GeneratorRecord& generator,
                                std::span<const GeneratedImage> outputs);

// Writes `bytes` to <dir>/<sha256>.png unless present; returns the path.
std::filesystem::path store_content_addressed(const std::filesystem::path& dir, const std::string& bytes);
std::string sha256_hex(const std::string& bytes);

// Built-in event modality for every RGB image, keyed by (seed, image id).
std::vector<GeneratedImage> generate_events(const PairManifest& manifest, std::span<const ImageEntry> images,
                                            const std::filesystem::path& cache_root, std::uint64_t seed,
                                            double motion_px = 2.0, int workers = 1);

// Cache root: $MDSYN_CACHE when set, otherwise `fallback`.
std::filesystem::path cache_root(const std::filesystem::path& fallback);

// ---------------------------------------------------------------------------
// Matchers used by cleaning and evaluation
// ---------------------------------------------------------------------------

struct MatchRequest {
  std::string key;  // pair identifier, used by file-backed matchers
  std::string image_a;
  std::string image_b;
  const ImageF& a;
  const ImageF& b;
};

class PairMatcher {
 public:
  virtual ~PairMatcher() = default;
  virtual std::string identity() const = 0;
  virtual MatchSet match(const MatchRequest& request) const = 0;
};

class BaselineMatcher final : public PairMatcher {
 public:
  explicit BaselineMatcher(matcher::BaselineConfig cfg = {}) : cfg_(cfg) {}
  std::string identity() const override { return matcher::baseline_identity(cfg_); }
  MatchSet match(const MatchRequest& request) const override;

 private:
  matcher::BaselineConfig cfg_;
};

// Reads <dir>/<key>.txt correspondence files.
class IngestMatcher final : public PairMatcher {
 public:
  explicit IngestMatcher(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string identity() const override { return "ingest:" + dir_.filename().string(); }
  MatchSet match(const MatchRequest& request) const override;

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Cleaning, splitting, sampling
// ---------------------------------------------------------------------------

inline constexpr double kCleaningThresholdPx = 10.0;
inline constexpr double kReferenceDropRatePercent = 0.91;

struct CleanConfig {
  double threshold_px = kCleaningThresholdPx;
  int long_side = 640;
  estimators::RansacConfig ransac = estimators::default_homography_ransac();
  int workers = 1;
};

struct CleanResult {
  PairManifest kept;
  nlohmann::ordered_json report;
};

// Each generated image is matched against its RGB source (ground truth: identity).
// Images whose recovered homography has mean corner error above the threshold,
// or whose estimation fails, are dropped together with every pair using them.
CleanResult clean_dataset(const PairManifest& manifest, const PairMatcher& matcher, const CleanConfig& cfg = {});

// Pairs in `test_scenes` become test pairs, subsampled to `pairs_per_case` per
// modality case (0 keeps all); the surplus is removed so no test scene contributes
// training pairs. Throws InsufficientPairs, InvalidArgument for unknown scenes.
PairManifest split_train_test(const PairManifest& manifest, std::span<const std::string> test_scenes,
                              std::size_t pairs_per_case, std::uint64_t seed);

// Uniform draws of train pair ids over the chosen modality cases.
class TrainingPairSampler {
 public:
  // Throws EmptySubset for an empty subset or a case without train pairs,
  // UnknownModality for unregistered tags.
  TrainingPairSampler(const PairManifest& manifest, std::span<const std::string> modalities, std::uint64_t seed);

  const std::string& next();
  std::vector<std::string> take(std::size_t n);
  const std::vector<std::string>& cases() const noexcept { return cases_; }

 private:
  std::vector<std::string> cases_;
  std::vector<std::vector<std::string>> pairs_;
  Rng rng_;
};

// Grayscale image of a manifest entry, scaled to [0, 1].
ImageF load_gray(const PairManifest& manifest, const ImageEntry& entry);

}  // namespace mdsyn::engine
