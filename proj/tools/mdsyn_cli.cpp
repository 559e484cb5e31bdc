// mdsyn command-line entry point.
//
// Exit codes
//   0   success
//   2   usage error
//   10  invalid config or manifest        20  evaluation failed (other)
//   11  generator failed                  21  empty input
//   12  incomplete generator output       22  unparsable correspondence file
//   13  missing modality                  23  correspondence out of bounds
//   14  unknown modality                  24  I/O error during evaluation
//   15  insufficient pairs                25  invalid argument during evaluation
//   16  empty subset
//   17  I/O error
//   18  invalid argument
//   19  other engine error

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "mdsyn/engine.hpp"
#include "mdsyn/error.hpp"
#include "mdsyn/eventsim.hpp"
#include "mdsyn/image.hpp"
#include "mdsyn/metrics.hpp"
#include "mdsyn/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mdsyn;

namespace {

int engine_exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidManifest:
    case ErrorCode::ParseError: return 10;
    case ErrorCode::GeneratorFailed: return 11;
    case ErrorCode::IncompleteOutput: return 12;
    case ErrorCode::MissingModality: return 13;
    case ErrorCode::UnknownModality: return 14;
    case ErrorCode::InsufficientPairs: return 15;
    case ErrorCode::EmptySubset: return 16;
    case ErrorCode::IoError: return 17;
    case ErrorCode::InvalidArgument: return 18;
    default: return 19;
  }
}

int evaluate_exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyInput: return 21;
    case ErrorCode::ParseError: return 22;
    case ErrorCode::BoundsError: return 23;
    case ErrorCode::IoError: return 24;
    case ErrorCode::InvalidArgument: return 25;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidManifest: return 10;
    default: return 20;
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--config", c.config, "Pipeline config (JSON)");
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--workers", c.workers, "Worker count")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, out_help);
}

pipeline::PipelineConfig load_config(const Common& c, const std::string& manifest_override) {
  json j = json::object();
  fs::path base;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + c.config);
    try {
      j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, "config " + c.config + ": " + e.what());
    }
    base = fs::path(c.config).parent_path();
  }
  if (c.seed) j["seed"] = *c.seed;
  if (c.workers) j["workers"] = *c.workers;
  pipeline::PipelineConfig cfg = pipeline::PipelineConfig::from_json(j, base);
  if (!manifest_override.empty()) cfg.manifest = manifest_override;
  cfg.validate(true);
  return cfg;
}

fs::path out_or(const Common& c, const fs::path& fallback) { return c.out.empty() ? fallback : fs::path(c.out); }

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::unique_ptr<engine::PairMatcher> make_matcher(const std::string& matches_dir) {
  if (matches_dir.empty()) return std::make_unique<engine::BaselineMatcher>();
  return std::make_unique<engine::IngestMatcher>(matches_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mdsyn: synthetic multimodal matching data engine and evaluation harness"};
  app.require_subcommand(1);

  Common gen_c, pair_c, clean_c, split_c, sample_c, pose_c, homog_c, quality_c, stats_c;
  std::string manifest_override;

  auto* gen = app.add_subcommand("generate", "Generate one modality for every RGB image");
  add_common(gen, gen_c, "Output manifest path");
  std::string gen_modality;
  gen->add_option("--modality", gen_modality, "Modality tag")->required();
  gen->add_option("--manifest", manifest_override, "Input manifest (overrides config)");

  auto* pair = app.add_subcommand("pair", "Build cross-modal pairs from RGB pairs");
  add_common(pair, pair_c, "Output manifest path");
  std::vector<std::string> pair_modalities;
  pair->add_option("--modalities", pair_modalities, "Modality tags (comma separated)");
  pair->add_option("--manifest", manifest_override, "Input manifest (overrides config)");

  auto* clean = app.add_subcommand("clean", "Drop misaligned generated images");
  add_common(clean, clean_c, "Output directory");
  std::string clean_matches;
  std::optional<double> clean_threshold;
  clean->add_option("--matches", clean_matches, "Ingest correspondence files from this directory");
  clean->add_option("--threshold", clean_threshold, "Mean corner error threshold (px)");
  clean->add_option("--manifest", manifest_override, "Input manifest (overrides config)");

  auto* split = app.add_subcommand("split", "Assign train/test splits");
  add_common(split, split_c, "Output manifest path");
  std::vector<std::string> test_scenes;
  std::size_t per_case = 0;
  split->add_option("--test-scenes", test_scenes, "Test scene ids (comma separated)");
  split->add_option("--per-case", per_case, "Test pairs per modality case (0 keeps all)");
  split->add_option("--manifest", manifest_override, "Input manifest (overrides config)");

  auto* sample = app.add_subcommand("sample", "Draw training pair ids");
  add_common(sample, sample_c, "Output file (default stdout)");
  std::vector<std::string> sample_modalities;
  std::size_t sample_count = 10;
  sample->add_option("--modalities", sample_modalities, "Modality subset (comma separated)")->required();
  sample->add_option("--count", sample_count, "Number of draws");
  sample->add_option("--manifest", manifest_override, "Input manifest (overrides config)");

  std::string eval_matches;
  bool eval_svg = false, eval_timing = false, eval_prepare = false, eval_all = false;
  auto add_eval = [&](CLI::App* cmd, Common& c) {
    add_common(cmd, c, "Report directory");
    cmd->add_option("--matches", eval_matches, "Ingest correspondence files from this directory");
    cmd->add_flag("--svg", eval_svg, "Also write an SVG bar chart");
    cmd->add_flag("--timing", eval_timing, "Record per-pair runtimes (reports become non-reproducible)");
    cmd->add_flag("--prepare-only", eval_prepare, "Export resized inputs for an external matcher and stop");
    cmd->add_flag("--all-splits", eval_all, "Evaluate train pairs too");
    cmd->add_option("--manifest", manifest_override, "Input manifest (overrides config)");
  };
  auto* eval_pose = app.add_subcommand("evaluate-pose", "Relative pose evaluation");
  add_eval(eval_pose, pose_c);
  auto* eval_homog = app.add_subcommand("evaluate-homography", "Homography evaluation");
  add_eval(eval_homog, homog_c);

  auto* quality = app.add_subcommand("quality", "PSNR and SSIM between two images");
  add_common(quality, quality_c, "Output JSON (default stdout)");
  std::string q_ref, q_cand;
  quality->add_option("--reference", q_ref, "Reference PNG")->required();
  quality->add_option("--candidate", q_cand, "Candidate PNG")->required();

  auto* stats = app.add_subcommand("stats", "Intensity histograms");
  add_common(stats, stats_c, "Output JSON (default stdout)");
  std::vector<std::string> stats_images;
  int stats_bins = 256;
  stats->add_option("--images", stats_images, "PNG files (default: every image in the manifest, per modality)");
  stats->add_option("--bins", stats_bins, "Histogram bins")->check(CLI::Range(2, 256));
  stats->add_option("--manifest", manifest_override, "Input manifest (overrides config)");

  auto* events = app.add_subcommand("event-frames", "Event generator plugin: {input_dir} -> {output_dir}");
  std::string ev_in, ev_out;
  std::uint64_t ev_seed = 0;
  double ev_motion = 2.0;
  events->add_option("--input-dir", ev_in)->required();
  events->add_option("--output-dir", ev_out)->required();
  events->add_option("--seed", ev_seed);
  events->add_option("--motion-px", ev_motion);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const bool evaluating = eval_pose->parsed() || eval_homog->parsed();
  try {
    if (gen->parsed()) {
      const auto cfg = load_config(gen_c, manifest_override);
      const auto m = engine::PairManifest::load(cfg.manifest);
      const auto out = pipeline::generate_modality(m, cfg, gen_modality);
      pipeline::save_manifest(out, out_or(gen_c, cfg.output / ("manifest." + gen_modality + ".json")));
    } else if (pair->parsed()) {
      const auto cfg = load_config(pair_c, manifest_override);
      const auto m = engine::PairManifest::load(cfg.manifest);
      const auto mods = split_list(pair_modalities);
      const auto out = engine::build_cross_modal_pairs(m, mods);
      pipeline::save_manifest(out, out_or(pair_c, cfg.output / "manifest.pairs.json"));
      std::cout << out.pairs.size() << " pairs\n";
    } else if (clean->parsed()) {
      auto cfg = load_config(clean_c, manifest_override);
      const auto m = engine::PairManifest::load(cfg.manifest);
      engine::CleanConfig cc;
      cc.threshold_px = clean_threshold.value_or(cfg.clean_threshold_px);
      cc.long_side = cfg.resize;
      cc.ransac = cfg.homography_ransac;
      cc.workers = cfg.workers;
      const auto matcher = make_matcher(clean_matches);
      const auto result = engine::clean_dataset(m, *matcher, cc);
      const fs::path dir = out_or(clean_c, cfg.output);
      pipeline::save_manifest(result.kept, dir / "manifest.clean.json");
      write_json(dir / "clean_report.json", result.report);
      std::cout << result.report["dropped"].get<std::size_t>() << " of " << result.report["checked"].get<std::size_t>()
                << " generated images dropped\n";
    } else if (split->parsed()) {
      const auto cfg = load_config(split_c, manifest_override);
      const auto m = engine::PairManifest::load(cfg.manifest);
      const auto scenes = split_list(test_scenes);
      const auto out = engine::split_train_test(m, scenes, per_case, cfg.seed);
      pipeline::save_manifest(out, out_or(split_c, cfg.output / "manifest.split.json"));
    } else if (sample->parsed()) {
      const auto cfg = load_config(sample_c, manifest_override);
      const auto m = engine::PairManifest::load(cfg.manifest);
      const auto mods = split_list(sample_modalities);
      engine::TrainingPairSampler sampler(m, mods, cfg.seed);
      std::ostringstream text;
      for (const std::string& id : sampler.take(sample_count)) text << id << '\n';
      if (sample_c.out.empty()) {
        std::cout << text.str();
      } else {
        std::ofstream out(sample_c.out, std::ios::binary);
        out << text.str();
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + sample_c.out);
      }
    } else if (evaluating) {
      const bool pose = eval_pose->parsed();
      const Common& c = pose ? pose_c : homog_c;
      const auto cfg = load_config(c, manifest_override);
      const auto m = engine::PairManifest::load(cfg.manifest);
      pipeline::EvalOptions opts;
      opts.task = pose ? metrics::Task::Pose : metrics::Task::Homography;
      opts.timing = eval_timing;
      opts.all_splits = eval_all;
      const fs::path dir = out_or(c, cfg.output);
      if (eval_prepare) {
        pipeline::prepare_inputs(m, cfg, opts, dir / "prepared");
        return 0;
      }
      const auto matcher = make_matcher(eval_matches);
      const auto report = pipeline::evaluate(m, cfg, *matcher, opts);
      pipeline::write_report(report, dir, pose ? "pose_report" : "homography_report", eval_svg);
      for (const auto& [name, summary] : report.cases) {
        std::cout << name;
        for (std::size_t i = 0; i < summary.auc.thresholds.size(); ++i) {
          std::cout << "  AUC@" << metrics::format_double(summary.auc.thresholds[i]) << "="
                    << metrics::format_double(summary.auc.values[i]);
        }
        std::cout << '\n';
      }
    } else if (quality->parsed()) {
      const ImageU8 ref = read_png(q_ref);
      const ImageU8 cand = read_png(q_cand);
      json j;
      j["psnr_db"] = metrics::psnr(ref, cand);
      const ImageU8 gr = to_u8(to_gray(ref));
      const ImageU8 gc = to_u8(to_gray(cand));
      j["ssim"] = metrics::ssim(gr, gc);
      if (quality_c.out.empty()) std::cout << j.dump(2) << '\n';
      else write_json(quality_c.out, j);
    } else if (stats->parsed()) {
      json j;
      j["bins"] = stats_bins;
      if (!stats_images.empty()) {
        json per = json::object();
        for (const std::string& path : stats_images) {
          per[path] = metrics::intensity_histogram(to_u8(to_gray(read_png(path))), stats_bins);
        }
        j["images"] = per;
      } else {
        const auto cfg = load_config(stats_c, manifest_override);
        const auto m = engine::PairManifest::load(cfg.manifest);
        std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
        for (const engine::ImageEntry& e : m.images) {
          const auto h = metrics::intensity_histogram(to_u8(engine::load_gray(m, e)), stats_bins);
          auto& [sum, count] = acc[e.modality];
          if (sum.empty()) sum.assign(h.size(), 0.0);
          for (std::size_t i = 0; i < h.size(); ++i) sum[i] += h[i];
          ++count;
        }
        json per = json::object();
        for (auto& [modality, entry] : acc) {
          for (double& v : entry.first) v /= static_cast<double>(entry.second);
          per[modality] = {{"images", entry.second}, {"histogram", entry.first}};
        }
        j["modalities"] = per;
      }
      if (stats_c.out.empty()) std::cout << j.dump(2) << '\n';
      else write_json(stats_c.out, j);
    } else if (events->parsed()) {
      fs::create_directories(ev_out);
      std::vector<fs::path> inputs;
      for (const auto& entry : fs::directory_iterator(ev_in)) {
        if (entry.path().extension() == ".png") inputs.push_back(entry.path());
      }
      std::sort(inputs.begin(), inputs.end());
      for (const fs::path& p : inputs) {
        const auto ev = eventsim::generate_event_image(read_png(p), ev_seed, p.stem().string(), ev_motion);
        write_png(fs::path(ev_out) / p.filename(), ev.frame);
      }
    }
  } catch (const Error& e) {
    std::cerr << "mdsyn: " << to_string(e.code()) << ": " << e.what() << '\n';
    return evaluating ? evaluate_exit_code(e.code()) : engine_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "mdsyn: " << e.what() << '\n';
    return evaluating ? 20 : 19;
  }
  return 0;
}
