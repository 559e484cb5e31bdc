#pragma once

#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mdsyn/geometry.hpp"
#include "mdsyn/image.hpp"

namespace mdsyn::metrics {

// Evaluation constants shared by every report.
inline const std::vector<double> kPoseThresholdsDeg = {5.0, 10.0, 20.0};
inline const std::vector<double> kHomographyThresholdsPx = {3.0, 5.0, 10.0};
inline constexpr double kEpipolarCorrectThreshold = 5e-4;
inline constexpr double kProjectionCorrectThresholdPx = 3.0;
inline constexpr double kPsnrCapDb = 99.0;

// Area under the recall curve up to t, in percent. Failures enter as +inf.
// Throws EmptyInput for an empty error list and InvalidArgument for t <= 0.
double auc(const std::vector<double>& errors, double threshold);

struct AucTable {
  std::vector<double> thresholds;
  std::vector<double> values;  // percent
  std::size_t samples = 0;
};
AucTable auc_table(const std::vector<double>& errors, const std::vector<double>& thresholds);

struct PoseGroundTruth {
  Pose a_to_b;
  CameraModel cam_a;
  CameraModel cam_b;
};
using GroundTruth = std::variant<PoseGroundTruth, Homography>;

struct MatchStats {
  std::size_t total = 0;
  std::size_t correct = 0;
  double precision = 0.0;  // 0 for an empty match set
  std::vector<double> errors;
};

// A match is correct when its epipolar error is below 5e-4 (pose) or its
// projection error is below 3 px (homography).
MatchStats classify_matches(const MatchSet& matches, const GroundTruth& gt);

// Throws SizeMismatch. Identical images return kPsnrCapDb.
double psnr(const ImageU8& reference, const ImageU8& candidate);
// Gaussian-window SSIM (11x11, sigma 1.5) averaged over all fully contained windows.
// Grayscale only; throws SizeMismatch / InvalidArgument for images smaller than the window.
double ssim(const ImageU8& reference, const ImageU8& candidate);

// Probability mass per equal-width bin over [0, 256).
std::vector<double> intensity_histogram(const ImageU8& image, int bins);

enum class Task { Pose, Homography };
std::string to_string(Task task);

struct PairResult {
  std::string pair_id;
  std::string modality_case;  // e.g. "rgb-event"
  double error = 0.0;         // degrees or pixels; +inf when estimation failed
  bool failed = false;
  std::string failure;        // error code name when failed
  double runtime_ms = 0.0;
  std::size_t matches = 0;
  std::size_t correct = 0;
  bool zero_baseline = false;
};

struct CaseSummary {
  AucTable auc;
  std::size_t pairs = 0;
  std::size_t failures = 0;
  double mean_precision = 0.0;
  double mean_runtime_ms = 0.0;
  std::size_t total_matches = 0;
  std::size_t total_correct = 0;
};

struct EvalReport {
  Task task = Task::Homography;
  std::vector<double> thresholds;
  std::map<std::string, CaseSummary> cases;  // ordered by case name
  std::vector<PairResult> pairs;             // ordered by (case, pair id)
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  void write_csv(std::ostream& out) const;
  void write_svg(std::ostream& out, const std::string& title) const;
};

// Groups per-pair results by modality case. Independent of input order.
// Throws EmptyInput.
EvalReport aggregate_report(std::vector<PairResult> results, Task task, const std::vector<double>& thresholds);

// Evaluation constants as report metadata.
nlohmann::ordered_json protocol_constants();

// Text form of a double that round-trips exactly (shortest representation).
std::string format_double(double v);

}  // namespace mdsyn::metrics
