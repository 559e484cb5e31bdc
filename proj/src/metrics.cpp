#include "mdsyn/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "mdsyn/estimators.hpp"
#include "mdsyn/kernels.hpp"

namespace mdsyn::metrics {

double auc(const std::vector<double>& errors, double threshold) {
  if (errors.empty()) throw Error(ErrorCode::EmptyInput, "AUC of an empty error list");
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "AUC threshold must be positive");
  // Recall(e) is a step function; its integral over [0, t] is sum(max(0, t - e_i)) / n.
  double area = 0.0;
  for (double e : errors) {
    if (std::isnan(e)) throw Error(ErrorCode::InvalidArgument, "NaN error in AUC input");
    if (e < threshold) area += threshold - std::max(e, 0.0);
  }
  return 100.0 * area / (static_cast<double>(errors.size()) * threshold);
}

AucTable auc_table(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  AucTable table{thresholds, {}, errors.size()};
  for (double t : thresholds) table.values.push_back(auc(errors, t));
  return table;
}

MatchStats classify_matches(const MatchSet& matches, const GroundTruth& gt) {
  MatchStats stats;
  stats.total = matches.size();
  stats.errors.reserve(matches.size());
  if (const auto* pose = std::get_if<PoseGroundTruth>(&gt)) {
    const Mat3 e = estimators::essential_from_pose(pose->a_to_b);
    for (const Match& m : matches.matches) {
      const double err = estimators::epipolar_error(e, m, pose->cam_a, pose->cam_b);
      stats.errors.push_back(err);
      stats.correct += err < kEpipolarCorrectThreshold;
    }
  } else {
    const Homography& h = std::get<Homography>(gt);
    for (const Match& m : matches.matches) {
      double err = std::numeric_limits<double>::infinity();
      try {
        err = (apply_homography(h, m.a()) - m.b()).norm();
      } catch (const Error&) {
      }
      stats.errors.push_back(err);
      stats.correct += err < kProjectionCorrectThresholdPx;
    }
  }
  stats.precision = stats.total ? static_cast<double>(stats.correct) / stats.total : 0.0;
  return stats;
}

double psnr(const ImageU8& reference, const ImageU8& candidate) {
  if (!reference.same_shape(candidate)) throw Error(ErrorCode::SizeMismatch, "PSNR inputs differ in shape");
  if (reference.empty()) throw Error(ErrorCode::EmptyInput, "PSNR of empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = static_cast<double>(reference.data()[i]) - candidate.data()[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCapDb;
  const double mse = sse / static_cast<double>(reference.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImageU8& reference, const ImageU8& candidate) {
  if (!reference.same_shape(candidate)) throw Error(ErrorCode::SizeMismatch, "SSIM inputs differ in shape");
  if (reference.channels() != 1) throw Error(ErrorCode::InvalidArgument, "SSIM expects grayscale images");
  const GridD map = kernels::ssim_map(reference, candidate);
  if (map.empty()) throw Error(ErrorCode::InvalidArgument, "SSIM needs images of at least 11x11");
  double sum = 0.0;
  for (double v : map.data()) sum += v;
  return sum / static_cast<double>(map.size());
}

std::vector<double> intensity_histogram(const ImageU8& image, int bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "histogram needs at least 2 bins");
  if (image.empty()) throw Error(ErrorCode::EmptyInput, "histogram of an empty image");
  std::vector<std::size_t> counts(bins, 0);
  for (std::uint8_t v : image.data()) ++counts[static_cast<std::size_t>(v) * bins / 256];
  std::vector<double> mass(bins);
  for (int i = 0; i < bins; ++i) mass[i] = static_cast<double>(counts[i]) / static_cast<double>(image.size());
  return mass;
}

std::string to_string(Task task) { return task == Task::Pose ? "pose" : "homography"; }

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

EvalReport aggregate_report(std::vector<PairResult> results, Task task, const std::vector<double>& thresholds) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "no pair results to aggregate");
  std::sort(results.begin(), results.end(), [](const PairResult& a, const PairResult& b) {
    return std::tie(a.modality_case, a.pair_id) < std::tie(b.modality_case, b.pair_id);
  });
  EvalReport report;
  report.task = task;
  report.thresholds = thresholds;

  std::map<std::string, std::vector<const PairResult*>> grouped;
  for (const PairResult& r : results) grouped[r.modality_case].push_back(&r);
  for (const auto& [name, members] : grouped) {
    CaseSummary summary;
    std::vector<double> errors;
    double precision_sum = 0.0;
    double runtime_sum = 0.0;
    for (const PairResult* r : members) {
      errors.push_back(r->failed ? std::numeric_limits<double>::infinity() : r->error);
      summary.failures += r->failed;
      summary.total_matches += r->matches;
      summary.total_correct += r->correct;
      precision_sum += r->matches ? static_cast<double>(r->correct) / r->matches : 0.0;
      runtime_sum += r->runtime_ms;
    }
    summary.pairs = members.size();
    summary.auc = auc_table(errors, thresholds);
    summary.mean_precision = precision_sum / members.size();
    summary.mean_runtime_ms = runtime_sum / members.size();
    report.cases.emplace(name, std::move(summary));
  }
  report.pairs = std::move(results);
  report.metadata["protocol"] = protocol_constants();
  return report;
}

nlohmann::ordered_json protocol_constants() {
  nlohmann::ordered_json c;
  c["pose_auc_thresholds_deg"] = kPoseThresholdsDeg;
  c["homography_auc_thresholds_px"] = kHomographyThresholdsPx;
  c["correct_match_epipolar_threshold"] = kEpipolarCorrectThreshold;
  c["correct_match_projection_threshold_px"] = kProjectionCorrectThresholdPx;
  c["auc_integration"] = "exact integral of the empirical recall step function";
  c["failed_pair_error"] = "inf";
  c["pose_error"] = "max(rotation angle, translation direction angle)";
  c["homography_error"] = "mean corner projection error over the four image corners";
  return c;
}

namespace {

std::string threshold_key(double t) { return format_double(t); }

nlohmann::ordered_json error_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["mdsyn_report"] = 1;
  j["task"] = to_string(task);
  j["unit"] = task == Task::Pose ? "deg" : "px";
  j["thresholds"] = thresholds;
  nlohmann::ordered_json auc_j = nlohmann::ordered_json::object();
  nlohmann::ordered_json cases_j = nlohmann::ordered_json::object();
  for (const auto& [name, s] : cases) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < s.auc.thresholds.size(); ++i) row[threshold_key(s.auc.thresholds[i])] = s.auc.values[i];
    auc_j[name] = row;
    nlohmann::ordered_json cj;
    cj["pairs"] = s.pairs;
    cj["failures"] = s.failures;
    cj["matches"] = s.total_matches;
    cj["correct_matches"] = s.total_correct;
    cj["mean_precision"] = s.mean_precision;
    cj["mean_runtime_ms"] = s.mean_runtime_ms;
    cases_j[name] = cj;
  }
  j["auc"] = auc_j;
  j["cases"] = cases_j;
  nlohmann::ordered_json pairs_j = nlohmann::ordered_json::array();
  for (const PairResult& p : pairs) {
    nlohmann::ordered_json pj;
    pj["pair"] = p.pair_id;
    pj["case"] = p.modality_case;
    pj["error"] = p.failed ? nlohmann::ordered_json(nullptr) : error_json(p.error);
    pj["failed"] = p.failed;
    if (p.failed) pj["failure"] = p.failure;
    pj["matches"] = p.matches;
    pj["correct_matches"] = p.correct;
    pj["runtime_ms"] = p.runtime_ms;
    if (p.zero_baseline) pj["zero_baseline"] = true;
    pairs_j.push_back(pj);
  }
  j["pairs"] = pairs_j;
  j["metadata"] = metadata;
  return j;
}

void EvalReport::write_csv(std::ostream& out) const {
  const std::string unit = task == Task::Pose ? "deg" : "px";
  out << "case";
  for (double t : thresholds) out << ",AUC@" << format_double(t) << unit;
  out << ",pairs,failures,mean_precision,mean_runtime_ms\n";
  for (const auto& [name, s] : cases) {
    out << name;
    for (double v : s.auc.values) out << ',' << format_double(v);
    out << ',' << s.pairs << ',' << s.failures << ',' << format_double(s.mean_precision) << ','
        << format_double(s.mean_runtime_ms) << '\n';
  }
}

void EvalReport::write_svg(std::ostream& out, const std::string& title) const {
  static const char* kColors[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2"};
  constexpr int kBar = 18, kGap = 24, kPlotH = 200, kTop = 40, kLeft = 50;
  const int group_w = static_cast<int>(thresholds.size()) * kBar + kGap;
  const int width = kLeft + std::max<int>(1, static_cast<int>(cases.size())) * group_w + 20;
  const int height = kTop + kPlotH + 60;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<text x=\"" << kLeft << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + kPlotH << "\" x2=\"" << width - 10 << "\" y2=\""
      << kTop + kPlotH << "\" stroke=\"black\"/>\n";
  int gx = kLeft + kGap / 2;
  for (const auto& [name, s] : cases) {
    for (std::size_t i = 0; i < s.auc.values.size(); ++i) {
      const double h = kPlotH * s.auc.values[i] / 100.0;
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"%s\"><title>%s AUC@%s: %.2f</title></rect>\n",
                    gx + static_cast<int>(i) * kBar, kTop + kPlotH - h, kBar - 2, h, kColors[i % 5], name.c_str(),
                    format_double(s.auc.thresholds[i]).c_str(), s.auc.values[i]);
      out << buf;
    }
    out << "<text x=\"" << gx << "\" y=\"" << kTop + kPlotH + 16
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << name << "</text>\n";
    gx += group_w;
  }
  out << "</svg>\n";
}

}  // namespace mdsyn::metrics
