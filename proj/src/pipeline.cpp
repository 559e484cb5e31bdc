#include "mdsyn/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iterator>
#include <limits>

#include "mdsyn/error.hpp"
#include "mdsyn/image.hpp"

namespace mdsyn::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json ransac_to_json(const estimators::RansacConfig& r) {
  return {{"threshold", r.threshold},
          {"max_iterations", r.max_iterations},
          {"confidence", r.confidence},
          {"seed", r.seed}};
}

estimators::RansacConfig ransac_from_json(const json& j, estimators::RansacConfig r) {
  r.threshold = j.value("threshold", r.threshold);
  r.max_iterations = j.value("max_iterations", r.max_iterations);
  r.confidence = j.value("confidence", r.confidence);
  r.seed = j.value("seed", r.seed);
  return r;
}

std::string polarity_name(eventsim::PolarityMode p) {
  switch (p) {
    case eventsim::PolarityMode::PositiveOnly: return "positive";
    case eventsim::PolarityMode::NegativeOnly: return "negative";
    default: return "both";
  }
}

eventsim::PolarityMode polarity_from(const std::string& s) {
  if (s == "both") return eventsim::PolarityMode::Both;
  if (s == "positive") return eventsim::PolarityMode::PositiveOnly;
  if (s == "negative") return eventsim::PolarityMode::NegativeOnly;
  throw Error(ErrorCode::InvalidConfig, "unknown polarity '" + s + "'");
}

fs::path resolve_against(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string relative_to(const fs::path& target, const fs::path& base) {
  if (base.empty()) return target.generic_string();
  std::error_code ec;
  const fs::path rel = fs::proximate(target, base, ec);
  return ec ? target.generic_string() : rel.generic_string();
}

// Estimation outcomes that are data rather than pipeline errors.
bool is_estimation_failure(ErrorCode c) {
  switch (c) {
    case ErrorCode::EstimationFailed:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::DegenerateSample:
    case ErrorCode::CheiralityAmbiguous:
    case ErrorCode::PointAtInfinity:
      return true;
    default:
      return false;
  }
}

bool applicable(const engine::PairEntry& p, metrics::Task task) {
  if (task == metrics::Task::Pose) return p.label.kind == engine::LabelKind::PoseDepth;
  return p.label.kind != engine::LabelKind::PoseDepth;
}

struct Prepared {
  ImageF a, b;
  metrics::GroundTruth gt;
  bool zero_baseline = false;
};

Prepared prepare_pair(const engine::PairManifest& manifest, const PipelineConfig& cfg, const engine::PairEntry& pair,
                      metrics::Task task) {
  const engine::ImageEntry* ea = manifest.find_image(pair.a);
  const engine::ImageEntry* eb = manifest.find_image(pair.b);
  if (!ea || !eb) throw Error(ErrorCode::InvalidManifest, "pair " + pair.id + " references a missing image");
  const augment::Resized ra = augment::resize_long_side(engine::load_gray(manifest, *ea), cfg.resize);
  augment::Resized rb = augment::resize_long_side(engine::load_gray(manifest, *eb), cfg.resize);
  Prepared p{ra.image, rb.image, Homography::identity(), false};

  if (task == metrics::Task::Pose) {
    const engine::PoseLabel label = engine::resolve_pose_label(manifest, pair);
    const CameraModel ca = label.cam_a.scaled(ra.scale, ra.image.width(), ra.image.height());
    const CameraModel cb = label.cam_b.scaled(rb.scale, rb.image.width(), rb.image.height());
    p.gt = metrics::PoseGroundTruth{label.a_to_b, ca, cb};
    p.zero_baseline = label.a_to_b.t.norm() == 0.0;
    return p;
  }

  if (pair.label.kind == engine::LabelKind::Homography) {
    if (!pair.label.homography) throw Error(ErrorCode::InvalidManifest, "pair " + pair.id + " lacks a homography");
    p.gt = augment::rescale_homography(Homography(*pair.label.homography), ra.scale, rb.scale);
    return p;
  }
  // Aligned: B is pixel-aligned with A; a seeded warp of B provides the geometry.
  const Homography align = augment::rescale_homography(Homography::identity(), ra.scale, rb.scale);
  Rng rng = derive_rng(cfg.warp.seed, "warp:" + pair.id);
  const augment::SampledWarp w = augment::sample_warp(cfg.warp, rb.image.width(), rb.image.height(), rng);
  p.b = augment::warp_image(rb.image, w.total, rb.image.width(), rb.image.height());
  p.gt = w.total.compose(align);
  return p;
}

metrics::PairResult evaluate_pair(const Prepared& prep, const engine::PairEntry& pair, const PipelineConfig& cfg,
                                  const engine::PairMatcher& matcher, metrics::Task task) {
  metrics::PairResult r;
  r.pair_id = pair.id;
  r.modality_case = pair.modality_case;
  r.zero_baseline = prep.zero_baseline;
  const MatchSet matches = matcher.match({pair.id, pair.a, pair.b, prep.a, prep.b});
  r.matches = matches.matches.size();
  r.correct = metrics::classify_matches(matches, prep.gt).correct;
  Rng seeder = derive_rng(cfg.seed, "ransac:" + pair.id);
  try {
    if (task == metrics::Task::Homography) {
      estimators::RansacConfig rc = cfg.homography_ransac;
      rc.seed ^= seeder();
      const auto fit = estimators::ransac_homography(matches, rc);
      r.error = estimators::corner_error(fit.model, std::get<Homography>(prep.gt), prep.a.width(), prep.a.height());
    } else {
      const auto& gt = std::get<metrics::PoseGroundTruth>(prep.gt);
      estimators::RansacConfig rc = cfg.essential_ransac;
      rc.seed ^= seeder();
      const auto fit = estimators::ransac_essential(matches, gt.cam_a, gt.cam_b, rc);
      r.error = estimators::pose_error(fit.model, gt.a_to_b);
    }
  } catch (const Error& e) {
    if (!is_estimation_failure(e.code())) throw;
    r.failed = true;
    r.failure = to_string(e.code());
    r.error = std::numeric_limits<double>::infinity();
  }
  return r;
}

std::vector<const engine::PairEntry*> selected_pairs(const engine::PairManifest& manifest, const EvalOptions& opts,
                                                     std::size_t& skipped) {
  std::vector<const engine::PairEntry*> out;
  skipped = 0;
  for (const engine::PairEntry& p : manifest.pairs) {
    if (!opts.all_splits && p.split != engine::Split::Test) continue;
    if (!applicable(p, opts.task)) {
      ++skipped;
      continue;
    }
    out.push_back(&p);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    if (j.contains("manifest")) c.manifest = resolve_against(base_dir, j["manifest"].get<std::string>());
    if (j.contains("cache")) c.cache = j["cache"].get<std::string>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    c.cache = resolve_against(base_dir, c.cache);
    c.output = resolve_against(base_dir, c.output);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.warp.seed = c.seed;
    c.event.seed = c.seed;
    if (j.contains("warp")) {
      const json& w = j["warp"];
      c.warp.perturbation = w.value("perturbation", c.warp.perturbation);
      c.warp.rotation_deg = w.value("rotation_deg", c.warp.rotation_deg);
      c.warp.scale_range = w.value("scale_range", c.warp.scale_range);
      c.warp.translation = w.value("translation", c.warp.translation);
      c.warp.seed = w.value("seed", c.warp.seed);
    }
    if (j.contains("event")) {
      const json& e = j["event"];
      c.event.contrast = e.value("contrast", c.event.contrast);
      c.event.polarity = polarity_from(e.value("polarity", std::string("both")));
      c.event.motion_px = e.value("motion_px", c.event.motion_px);
      c.event.seed = e.value("seed", c.event.seed);
    }
    if (j.contains("ransac")) {
      const json& r = j["ransac"];
      if (r.contains("homography")) c.homography_ransac = ransac_from_json(r["homography"], c.homography_ransac);
      if (r.contains("essential")) c.essential_ransac = ransac_from_json(r["essential"], c.essential_ransac);
    }
    if (j.contains("thresholds")) {
      const json& t = j["thresholds"];
      if (t.contains("pose")) c.pose_thresholds = t["pose"].get<std::vector<double>>();
      if (t.contains("homography")) c.homography_thresholds = t["homography"].get<std::vector<double>>();
    }
    c.resize = j.value("resize", c.resize);
    c.clean_threshold_px = j.value("clean_threshold_px", c.clean_threshold_px);
    if (j.contains("generators")) {
      for (const json& g : j["generators"]) c.generators.push_back(engine::GeneratorSpec::from_json(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  c.validate(false);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
  json j;
  j["manifest"] = manifest.generic_string();
  j["cache"] = cache.generic_string();
  j["output"] = output.generic_string();
  j["seed"] = seed;
  j["workers"] = workers;
  j["warp"] = {{"perturbation", warp.perturbation},
               {"rotation_deg", warp.rotation_deg},
               {"scale_range", warp.scale_range},
               {"translation", warp.translation},
               {"seed", warp.seed}};
  j["event"] = {{"contrast", event.contrast},
                {"polarity", polarity_name(event.polarity)},
                {"motion_px", event.motion_px},
                {"seed", event.seed}};
  j["ransac"] = {{"homography", ransac_to_json(homography_ransac)}, {"essential", ransac_to_json(essential_ransac)}};
  j["thresholds"] = {{"pose", pose_thresholds}, {"homography", homography_thresholds}};
  j["resize"] = resize;
  j["clean_threshold_px"] = clean_threshold_px;
  json gens = json::array();
  for (const engine::GeneratorSpec& g : generators) gens.push_back(g.to_json());
  j["generators"] = gens;
  return j;
}

void PipelineConfig::validate(bool require_manifest) const {
  if (workers < 1) throw Error(ErrorCode::InvalidConfig, "workers must be >= 1");
  if (resize < 16) throw Error(ErrorCode::InvalidConfig, "resize must be >= 16");
  if (!(clean_threshold_px >= 0.0)) throw Error(ErrorCode::InvalidConfig, "clean_threshold_px must be >= 0");
  for (const auto* ts : {&pose_thresholds, &homography_thresholds}) {
    if (ts->empty()) throw Error(ErrorCode::InvalidConfig, "threshold list is empty");
    for (double t : *ts) {
      if (!(t > 0.0)) throw Error(ErrorCode::InvalidConfig, "thresholds must be positive");
    }
  }
  try {
    warp.validate();
    event.validate();
    homography_ransac.validate();
    essential_ransac.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (require_manifest) {
    if (manifest.empty()) throw Error(ErrorCode::InvalidConfig, "no manifest configured");
    if (!fs::exists(manifest)) throw Error(ErrorCode::InvalidConfig, "manifest " + manifest.string() + " not found");
  }
}

const engine::GeneratorSpec* PipelineConfig::generator_for(std::string_view modality) const {
  for (const engine::GeneratorSpec& g : generators) {
    if (g.modality == modality) return &g;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

engine::PairManifest rebase(const engine::PairManifest& manifest, const fs::path& new_base) {
  engine::PairManifest out = manifest;
  const fs::path base = fs::absolute(new_base).lexically_normal();
  auto move = [&](std::string& p) {
    if (p.empty()) return;
    p = relative_to(fs::absolute(manifest.resolve(p)).lexically_normal(), base);
  };
  for (engine::ImageEntry& e : out.images) {
    move(e.path);
    move(e.depth);
  }
  for (engine::PairEntry& p : out.pairs) {
    move(p.label.depth_a);
    move(p.label.depth_b);
  }
  out.base_dir = base;
  return out;
}

void save_manifest(const engine::PairManifest& manifest, const fs::path& path) {
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  fs::create_directories(dir);
  rebase(manifest, dir).save(path);
}

engine::PairManifest generate_modality(const engine::PairManifest& manifest, const PipelineConfig& cfg,
                                       const std::string& modality) {
  std::vector<engine::ImageEntry> sources;
  for (const engine::ImageEntry& e : manifest.images) {
    if (e.modality == "rgb" && e.source.empty()) sources.push_back(e);
  }
  const fs::path root = engine::cache_root(cfg.cache);
  if (const engine::GeneratorSpec* spec = cfg.generator_for(modality)) {
    const auto outputs = engine::run_generator(*spec, manifest, sources, root, cfg.workers);
    return engine::register_generated(manifest, {spec->name, spec->version, spec->modality}, outputs);
  }
  if (modality == "event") {
    const auto outputs = engine::generate_events(manifest, sources, root, cfg.event.seed, cfg.event.motion_px,
                                                 cfg.workers);
    return engine::register_generated(manifest, {"eventsim", "1", "event"}, outputs);
  }
  if (!engine::is_registered_modality(modality)) {
    throw Error(ErrorCode::UnknownModality, "unregistered modality '" + modality + "'");
  }
  throw Error(ErrorCode::InvalidConfig, "no generator configured for modality '" + modality + "'");
}

metrics::EvalReport evaluate(const engine::PairManifest& manifest, const PipelineConfig& cfg,
                             const engine::PairMatcher& matcher, const EvalOptions& opts) {
  std::size_t skipped = 0;
  const std::vector<const engine::PairEntry*> pairs = selected_pairs(manifest, opts, skipped);
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no pairs to evaluate");

  const std::size_t n = pairs.size();
  std::vector<metrics::PairResult> results(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(cfg.workers)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const Prepared prep = prepare_pair(manifest, cfg, *pairs[i], opts.task);
      const auto t0 = std::chrono::steady_clock::now();
      results[i] = evaluate_pair(prep, *pairs[i], cfg, matcher, opts.task);
      if (opts.timing) {
        results[i].runtime_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "pair " + pairs[i]->id + ": " + e.what());
    }
  }

  const bool pose = opts.task == metrics::Task::Pose;
  metrics::EvalReport report =
      metrics::aggregate_report(std::move(results), opts.task, pose ? cfg.pose_thresholds : cfg.homography_thresholds);
  report.metadata["matcher"] = matcher.identity();
  report.metadata["resize"] = cfg.resize;
  report.metadata["split"] = opts.all_splits ? "all" : "test";
  report.metadata["skipped_pairs"] = skipped;
  report.metadata["timing"] = opts.timing;
  report.metadata["protocol"]["default_resize"] = kDefaultResize;
  report.metadata["protocol"]["cleaning_threshold_px"] = engine::kCleaningThresholdPx;
  report.metadata["protocol"]["keypoint_budget"] = matcher::kDefaultMaxKeypoints;
  // Locations are machine-specific; the manifest is identified by content instead.
  json resolved = cfg.to_json();
  resolved.erase("cache");
  resolved.erase("output");
  resolved["manifest"] = cfg.manifest.filename().generic_string();
  report.metadata["config"] = resolved;
  if (!cfg.manifest.empty() && fs::exists(cfg.manifest)) {
    std::ifstream in(cfg.manifest, std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    report.metadata["manifest_sha256"] = engine::sha256_hex(bytes);
  }
  return report;
}

void prepare_inputs(const engine::PairManifest& manifest, const PipelineConfig& cfg, const EvalOptions& opts,
                    const fs::path& dir) {
  std::size_t skipped = 0;
  const std::vector<const engine::PairEntry*> pairs = selected_pairs(manifest, opts, skipped);
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no pairs to prepare");
  fs::create_directories(dir);
  std::ofstream list(dir / "pairs.txt", std::ios::binary);
  for (const engine::PairEntry* p : pairs) {
    const Prepared prep = prepare_pair(manifest, cfg, *p, opts.task);
    write_png(dir / (p->id + ".a.png"), to_u8(prep.a));
    write_png(dir / (p->id + ".b.png"), to_u8(prep.b));
    list << p->id << ' ' << p->a << ' ' << p->b << '\n';
  }
  if (!list) throw Error(ErrorCode::IoError, "cannot write " + (dir / "pairs.txt").string());
}

void write_report(const metrics::EvalReport& report, const fs::path& dir, const std::string& stem, bool svg) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / (stem + ".json"), std::ios::binary);
    out << report.to_json().dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write report json");
  }
  {
    std::ofstream out(dir / (stem + ".csv"), std::ios::binary);
    report.write_csv(out);
    if (!out) throw Error(ErrorCode::IoError, "cannot write report csv");
  }
  if (svg) {
    std::ofstream out(dir / (stem + ".svg"), std::ios::binary);
    report.write_svg(out, to_string(report.task));
    if (!out) throw Error(ErrorCode::IoError, "cannot write report svg");
  }
}

}  // namespace mdsyn::pipeline
