#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdsyn/augment.hpp"
#include "mdsyn/engine.hpp"
#include "mdsyn/estimators.hpp"
#include "mdsyn/eventsim.hpp"
#include "mdsyn/metrics.hpp"

namespace mdsyn::pipeline {

inline constexpr int kDefaultResize = 640;

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path cache = "cache";
  std::filesystem::path output = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  augment::WarpConfig warp;
  eventsim::EventSimConfig event;
  estimators::RansacConfig homography_ransac = estimators::default_homography_ransac();
  estimators::RansacConfig essential_ransac = estimators::default_essential_ransac();
  std::vector<double> pose_thresholds{5.0, 10.0, 20.0};
  std::vector<double> homography_thresholds{3.0, 5.0, 10.0};
  int resize = kDefaultResize;
  double clean_threshold_px = engine::kCleaningThresholdPx;
  std::vector<engine::GeneratorSpec> generators;

  // Relative paths in the file resolve against the config's directory.
  static PipelineConfig from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
  // Throws InvalidConfig; with `require_manifest` the manifest file must exist.
  void validate(bool require_manifest) const;

  const engine::GeneratorSpec* generator_for(std::string_view modality) const;
};

// Manifest with image and depth paths re-expressed relative to `new_base`.
engine::PairManifest rebase(const engine::PairManifest& manifest, const std::filesystem::path& new_base);
void save_manifest(const engine::PairManifest& manifest, const std::filesystem::path& path);

// Adds one generated modality for every RGB source image. "event" without a
// configured plugin uses the built-in simulator.
engine::PairManifest generate_modality(const engine::PairManifest& manifest, const PipelineConfig& cfg,
                                       const std::string& modality);

struct EvalOptions {
  metrics::Task task = metrics::Task::Homography;
  bool timing = false;  // runtimes are wall-clock and make reports non-reproducible
  bool all_splits = false;
};

// Evaluates every test pair with a usable label. Per-pair estimation failures
// are recorded in the report; I/O and input errors propagate.
// Throws EmptyInput when nothing is left to evaluate.
metrics::EvalReport evaluate(const engine::PairManifest& manifest, const PipelineConfig& cfg,
                             const engine::PairMatcher& matcher, const EvalOptions& opts);

// Writes the resized inputs an external matcher needs: <dir>/<pair>.a.png,
// <pair>.b.png and pairs.txt ("<pair> <a> <b>" per line).
void prepare_inputs(const engine::PairManifest& manifest, const PipelineConfig& cfg, const EvalOptions& opts,
                    const std::filesystem::path& dir);

// <dir>/<stem>.json, .csv and optionally .svg.
void write_report(const metrics::EvalReport& report, const std::filesystem::path& dir, const std::string& stem,
                  bool svg);

}  // namespace mdsyn::pipeline
