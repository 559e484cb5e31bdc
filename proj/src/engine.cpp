#include "mdsyn/engine.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mdsyn/augment.hpp"
#include "mdsyn/error.hpp"
#include "mdsyn/eventsim.hpp"
#include "mdsyn/image.hpp"
#include "mdsyn/process.hpp"

namespace mdsyn::engine {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

bool safe_file_stem(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string replace_all(std::string s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

// Scratch directory unique to this process and call.
fs::path make_work_dir(const fs::path& root, std::string_view tag) {
  static std::atomic<unsigned> counter{0};
  const fs::path dir = root / ".work" / (std::string(tag) + "-" + std::to_string(getpid()) + "-" +
                                         std::to_string(counter.fetch_add(1)));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string manifest_path(const PairManifest& manifest, const fs::path& path) {
  if (manifest.base_dir.empty()) return path.string();
  std::error_code ec;
  const fs::path rel = fs::proximate(path, manifest.base_dir, ec);
  return ec ? path.string() : rel.generic_string();
}

std::string png_bytes(const ImageU8& image, const fs::path& scratch) {
  write_png(scratch, image);
  std::string bytes = read_bytes(scratch);
  fs::remove(scratch);
  return bytes;
}

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t cross_modal_pair_count(std::uint64_t rgb_pairs, std::uint64_t modality_count) {
  return 2 * modality_count * rgb_pairs;
}

const ImageEntry* find_generated(const PairManifest& manifest, std::string_view source_id, std::string_view modality) {
  for (const ImageEntry& e : manifest.images) {
    if (e.source == source_id && e.modality == modality) return &e;
  }
  return nullptr;
}

PairManifest build_cross_modal_pairs(const PairManifest& manifest, std::span<const std::string> modalities) {
  if (modalities.empty()) return manifest;
  std::set<std::string> seen;
  for (const std::string& m : modalities) {
    if (!is_registered_modality(m)) throw Error(ErrorCode::UnknownModality, "unregistered modality '" + m + "'");
    if (m == "rgb") throw Error(ErrorCode::InvalidArgument, "rgb is the source modality");
    if (!seen.insert(m).second) throw Error(ErrorCode::InvalidArgument, "duplicate modality '" + m + "'");
  }

  PairManifest out = manifest;
  out.pairs.clear();
  std::vector<std::string> missing;
  for (const PairEntry& src : manifest.pairs) {
    if (src.modality_case != "rgb-rgb") continue;
    for (const std::string& m : modalities) {
      const ImageEntry* ga = find_generated(manifest, src.a, m);
      const ImageEntry* gb = find_generated(manifest, src.b, m);
      if (!ga) missing.push_back(m + ":" + src.a);
      if (!gb) missing.push_back(m + ":" + src.b);
      if (!ga || !gb) continue;

      PairEntry ab = src;
      ab.id = src.id + "__" + m + "__A0Bi";
      ab.b = gb->id;
      ab.modality_case = case_name("rgb", m);
      ab.source_pair = src.id;
      out.pairs.push_back(ab);

      PairEntry ba = src;
      ba.id = src.id + "__" + m + "__AiB0";
      ba.a = ga->id;
      ba.modality_case = case_name("rgb", m);
      ba.source_pair = src.id;
      out.pairs.push_back(ba);
    }
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string msg = "missing generated images:";
    for (const std::string& s : missing) msg += " " + s;
    throw Error(ErrorCode::MissingModality, msg);
  }
  return out;
}

// ---------------------------------------------------------------------------

void GeneratorSpec::validate() const {
  if (name.empty()) throw Error(ErrorCode::InvalidConfig, "generator name is empty");
  if (!is_registered_modality(modality) || modality == "rgb") {
    throw Error(ErrorCode::UnknownModality, "generator modality '" + modality + "' is not a generated modality");
  }
  if (command.find("{input_dir}") == std::string::npos || command.find("{output_dir}") == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "generator command needs {input_dir} and {output_dir}");
  }
  if (batch_size <= 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidConfig, "timeout must be positive");
  if (square_size < 0) throw Error(ErrorCode::InvalidConfig, "square_size must be >= 0");
}

GeneratorSpec GeneratorSpec::from_json(const json& j) {
  GeneratorSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.version = j.value("version", std::string());
    s.modality = j.at("modality").get<std::string>();
    s.command = j.at("command").get<std::string>();
    s.batch_size = j.value("batch_size", s.batch_size);
    s.timeout_seconds = j.value("timeout_s", s.timeout_seconds);
    s.square_size = j.value("square_size", s.square_size);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("generator spec: ") + e.what());
  }
  s.validate();
  return s;
}

json GeneratorSpec::to_json() const {
  return {{"name", name},         {"version", version},       {"modality", modality},
          {"command", command},   {"batch_size", batch_size}, {"timeout_s", timeout_seconds},
          {"square_size", square_size}};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

fs::path store_content_addressed(const fs::path& dir, const std::string& bytes) {
  fs::create_directories(dir);
  const fs::path target = dir / (sha256_hex(bytes) + ".png");
  if (fs::exists(target)) return target;
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = dir / (".tmp-" + std::to_string(getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  write_bytes(tmp, bytes);
  fs::rename(tmp, target);
  return target;
}

fs::path cache_root(const fs::path& fallback) {
  const char* env = std::getenv("MDSYN_CACHE");
  if (env && *env) return fs::path(env);
  return fallback;
}

std::vector<GeneratedImage> run_generator(const GeneratorSpec& spec, const PairManifest& manifest,
                                          std::span<const ImageEntry> images, const fs::path& root, int workers) {
  spec.validate();
  for (const ImageEntry& e : images) {
    if (!safe_file_stem(e.id)) throw Error(ErrorCode::InvalidArgument, "image id '" + e.id + "' is not file-safe");
  }
  const std::size_t n = images.size();
  std::vector<GeneratedImage> results(n);
  if (n == 0) return results;
  const std::size_t batch = static_cast<std::size_t>(spec.batch_size);
  const std::size_t batches = (n + batch - 1) / batch;
  const fs::path store_dir = root / spec.modality;

  auto run_batch = [&](std::size_t bi) {
    const std::size_t lo = bi * batch;
    const std::size_t hi = std::min(n, lo + batch);
    const fs::path work = make_work_dir(root, spec.name);
    const fs::path in_dir = work / "input";
    const fs::path out_dir = work / "output";
    fs::create_directories(in_dir);
    fs::create_directories(out_dir);

    struct Staged {
      int width, height;  // source dimensions
      int expect_w, expect_h;
      double scale;
    };
    std::vector<Staged> staged;
    for (std::size_t i = lo; i < hi; ++i) {
      const ImageEntry& e = images[i];
      const fs::path src = manifest.resolve(e.path);
      const ImageU8 img = read_png(src);
      const fs::path dst = in_dir / (e.id + ".png");
      if (spec.square_size > 0) {
        const int long_side = std::max(img.width(), img.height());
        const ImageF padded = augment::resize_pad_square(to_float(img), spec.square_size);
        write_png(dst, to_u8(padded));
        staged.push_back({img.width(), img.height(), spec.square_size, spec.square_size,
                          static_cast<double>(spec.square_size) / long_side});
      } else {
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        staged.push_back({img.width(), img.height(), img.width(), img.height(), 1.0});
      }
    }

    std::string cmd = replace_all(spec.command, "{input_dir}", shell_quote(in_dir.string()));
    cmd = replace_all(cmd, "{output_dir}", shell_quote(out_dir.string()));
    const ProcessResult pr = run_shell(cmd, spec.timeout_seconds);
    if (pr.timed_out) {
      throw Error(ErrorCode::GeneratorFailed, spec.name + " timed out after " + std::to_string(spec.timeout_seconds) +
                                                  " s; output:\n" + pr.output);
    }
    if (pr.exit_code != 0) {
      throw Error(ErrorCode::GeneratorFailed,
                  spec.name + " exited with status " + std::to_string(pr.exit_code) + "; output:\n" + pr.output);
    }

    for (std::size_t i = lo; i < hi; ++i) {
      const ImageEntry& e = images[i];
      const Staged& s = staged[i - lo];
      const fs::path out = out_dir / (e.id + ".png");
      if (!fs::exists(out)) throw Error(ErrorCode::IncompleteOutput, spec.name + " produced no output for " + e.id);
      ImageU8 produced;
      try {
        produced = read_png(out);
      } catch (const Error&) {
        throw Error(ErrorCode::IncompleteOutput, spec.name + " output for " + e.id + " is not a readable image");
      }
      if (produced.width() != s.expect_w || produced.height() != s.expect_h) {
        throw Error(ErrorCode::IncompleteOutput, spec.name + " output for " + e.id + " is " +
                                                     std::to_string(produced.width()) + "x" +
                                                     std::to_string(produced.height()) + ", expected " +
                                                     std::to_string(s.expect_w) + "x" + std::to_string(s.expect_h));
      }
      std::string bytes;
      if (spec.square_size > 0) {
        const ImageF back = augment::resize_to(to_float(produced), 1.0 / s.scale, s.width, s.height);
        bytes = png_bytes(to_u8(back), work / "restore.png");
      } else {
        bytes = read_bytes(out);
      }
      results[i] = {e.id, store_content_addressed(store_dir, bytes)};
    }
    fs::remove_all(work);
  };

  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(batches)));
  std::vector<std::exception_ptr> errors(batches);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t bi = next.fetch_add(1); bi < batches; bi = next.fetch_add(1)) {
      try {
        run_batch(bi);
      } catch (...) {
        errors[bi] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

PairManifest register_generated(const PairManifest& manifest, const GeneratorRecord& generator,
                                std::span<const GeneratedImage> outputs) {
  PairManifest out = manifest;
  const std::string tag = generator.version.empty() ? generator.name : generator.name + "@" + generator.version;
  for (const GeneratedImage& g : outputs) {
    const ImageEntry* src = manifest.find_image(g.source_id);
    if (!src) throw Error(ErrorCode::InvalidArgument, "unknown source image " + g.source_id);
    ImageEntry e = *src;
    e.id = g.source_id + "__" + generator.modality;
    e.path = manifest_path(manifest, g.path);
    e.modality = generator.modality;
    e.source = g.source_id;
    e.generator = tag;
    auto it = std::find_if(out.images.begin(), out.images.end(), [&](const ImageEntry& x) { return x.id == e.id; });
    if (it != out.images.end()) *it = e;
    else out.images.push_back(e);
  }
  const bool known = std::any_of(out.generators.begin(), out.generators.end(), [&](const GeneratorRecord& r) {
    return r.name == generator.name && r.version == generator.version && r.modality == generator.modality;
  });
  if (!known) out.generators.push_back(generator);
  return out;
}

std::vector<GeneratedImage> generate_events(const PairManifest& manifest, std::span<const ImageEntry> images,
                                            const fs::path& root, std::uint64_t seed, double motion_px,
                                            int workers) {
  const std::size_t n = images.size();
  std::vector<GeneratedImage> results(n);
  std::vector<std::exception_ptr> errors(n);
  const fs::path store_dir = root / "event";
  const fs::path work = make_work_dir(root, "event");
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const ImageEntry& e = images[i];
      const ImageU8 img = read_png(manifest.resolve(e.path));
      const eventsim::GeneratedEventImage ev = eventsim::generate_event_image(img, seed, e.id, motion_px);
      const std::string bytes = png_bytes(ev.frame, work / (std::to_string(i) + ".png"));
      results[i] = {e.id, store_content_addressed(store_dir, bytes)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  fs::remove_all(work);
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// ---------------------------------------------------------------------------

MatchSet BaselineMatcher::match(const MatchRequest& request) const {
  MatchSet m = matcher::match_images(request.a, request.b, cfg_);
  m.image_a = request.image_a;
  m.image_b = request.image_b;
  return m;
}

MatchSet IngestMatcher::match(const MatchRequest& request) const {
  const matcher::ImageBounds bounds{request.a.width(), request.a.height(), request.b.width(), request.b.height()};
  return matcher::ingest_matches(dir_ / (request.key + ".txt"), bounds);
}

ImageF load_gray(const PairManifest& manifest, const ImageEntry& entry) {
  return to_gray(read_png(manifest.resolve(entry.path)));
}

// ---------------------------------------------------------------------------

CleanResult clean_dataset(const PairManifest& manifest, const PairMatcher& matcher, const CleanConfig& cfg) {
  if (!(cfg.threshold_px >= 0.0)) throw Error(ErrorCode::InvalidArgument, "cleaning threshold must be >= 0");
  std::vector<const ImageEntry*> generated;
  for (const ImageEntry& e : manifest.images) {
    if (!e.source.empty()) generated.push_back(&e);
  }

  struct Outcome {
    double error = 0.0;
    bool failed = false;
    std::string failure;
  };
  const std::size_t n = generated.size();
  std::vector<Outcome> outcomes(n);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, cfg.workers))
  for (std::size_t i = 0; i < n; ++i) {
    const ImageEntry& g = *generated[i];
    try {
      const ImageEntry* src = manifest.find_image(g.source);
      if (!src) throw Error(ErrorCode::InvalidManifest, "missing source " + g.source);
      const augment::Resized a = augment::resize_long_side(load_gray(manifest, *src), cfg.long_side);
      const augment::Resized b = augment::resize_long_side(load_gray(manifest, g), cfg.long_side);
      const MatchSet m = matcher.match({g.source + "__" + g.id, src->id, g.id, a.image, b.image});
      const auto fit = estimators::ransac_homography(m, cfg.ransac);
      outcomes[i].error = estimators::corner_error(fit.model, Homography::identity(), a.image.width(), a.image.height());
    } catch (const Error& e) {
      outcomes[i].failed = true;
      outcomes[i].failure = to_string(e.code());
    }
  }

  std::set<std::string> dropped;
  std::size_t dropped_error = 0, dropped_failure = 0;
  json per_image = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const ImageEntry& g = *generated[i];
    const Outcome& o = outcomes[i];
    json ij;
    ij["id"] = g.id;
    ij["source"] = g.source;
    ij["modality"] = g.modality;
    if (o.failed) {
      ij["corner_error_px"] = nullptr;
      ij["status"] = "failed";
      ij["failure"] = o.failure;
      dropped.insert(g.id);
      ++dropped_failure;
    } else {
      ij["corner_error_px"] = o.error;
      const bool dirty = o.error > cfg.threshold_px;
      ij["status"] = dirty ? "dropped" : "kept";
      if (dirty) {
        dropped.insert(g.id);
        ++dropped_error;
      }
    }
    per_image.push_back(ij);
  }

  CleanResult result;
  result.kept = manifest;
  std::erase_if(result.kept.images, [&](const ImageEntry& e) { return dropped.count(e.id) > 0; });
  std::erase_if(result.kept.pairs,
                [&](const PairEntry& p) { return dropped.count(p.a) > 0 || dropped.count(p.b) > 0; });

  const std::size_t pairs_before = manifest.pairs.size();
  const std::size_t pairs_after = result.kept.pairs.size();
  json& r = result.report;
  r["matcher"] = matcher.identity();
  r["threshold_px"] = cfg.threshold_px;
  r["long_side"] = cfg.long_side;
  r["ransac_threshold_px"] = cfg.ransac.threshold;
  r["checked"] = n;
  r["dropped"] = dropped.size();
  r["dropped_error"] = dropped_error;
  r["dropped_failure"] = dropped_failure;
  r["image_drop_rate_percent"] = n ? 100.0 * static_cast<double>(dropped.size()) / static_cast<double>(n) : 0.0;
  r["pairs_before"] = pairs_before;
  r["pairs_after"] = pairs_after;
  r["pair_drop_rate_percent"] =
      pairs_before ? 100.0 * static_cast<double>(pairs_before - pairs_after) / static_cast<double>(pairs_before) : 0.0;
  r["reference_drop_rate_percent"] = kReferenceDropRatePercent;
  r["reference_note"] =
      "large-scale figure obtained with a learned matcher; context only, not expected to reproduce here";
  r["images"] = per_image;
  return result;
}

// ---------------------------------------------------------------------------

PairManifest split_train_test(const PairManifest& manifest, std::span<const std::string> test_scenes,
                              std::size_t pairs_per_case, std::uint64_t seed) {
  const std::set<std::string> known(manifest.scenes.begin(), manifest.scenes.end());
  const std::set<std::string> test(test_scenes.begin(), test_scenes.end());
  for (const std::string& s : test) {
    if (!known.count(s)) throw Error(ErrorCode::InvalidArgument, "unknown test scene '" + s + "'");
  }

  PairManifest out = manifest;
  std::map<std::string, std::vector<std::size_t>> by_case;
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    PairEntry& p = out.pairs[i];
    if (test.count(p.scene)) {
      p.split = Split::Test;
      by_case[p.modality_case].push_back(i);
    } else {
      p.split = Split::Train;
    }
  }
  if (pairs_per_case == 0) return out;

  std::vector<bool> keep(out.pairs.size(), true);
  for (auto& [name, idx] : by_case) {
    if (idx.size() < pairs_per_case) {
      throw Error(ErrorCode::InsufficientPairs, "case " + name + " has " + std::to_string(idx.size()) +
                                                    " test pairs, " + std::to_string(pairs_per_case) + " requested");
    }
    Rng rng = derive_rng(seed, "split:" + name);
    // Partial Fisher-Yates with the explicit index mapping.
    for (std::size_t i = 0; i < pairs_per_case; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = pairs_per_case; i < idx.size(); ++i) keep[idx[i]] = false;
  }
  std::vector<PairEntry> kept;
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    if (keep[i]) kept.push_back(std::move(out.pairs[i]));
  }
  out.pairs = std::move(kept);
  return out;
}

TrainingPairSampler::TrainingPairSampler(const PairManifest& manifest, std::span<const std::string> modalities,
                                         std::uint64_t seed)
    : rng_(derive_rng(seed, "sampler")) {
  if (modalities.empty()) throw Error(ErrorCode::EmptySubset, "modality subset is empty");
  std::set<std::string> seen;
  for (const std::string& m : modalities) {
    if (!is_registered_modality(m)) throw Error(ErrorCode::UnknownModality, "unregistered modality '" + m + "'");
    if (!seen.insert(m).second) continue;
    const std::string name = case_name("rgb", m);
    std::vector<std::string> ids;
    for (const PairEntry& p : manifest.pairs) {
      if (p.split == Split::Train && p.modality_case == name) ids.push_back(p.id);
    }
    if (ids.empty()) throw Error(ErrorCode::EmptySubset, "no train pairs for case " + name);
    cases_.push_back(name);
    pairs_.push_back(std::move(ids));
  }
}

const std::string& TrainingPairSampler::next() {
  const std::size_t c = static_cast<std::size_t>(uniform_index(rng_, cases_.size()));
  const std::size_t p = static_cast<std::size_t>(uniform_index(rng_, pairs_[c].size()));
  return pairs_[c][p];
}

std::vector<std::string> TrainingPairSampler::take(std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(next());
  return out;
}

}  // namespace mdsyn::engine
