#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mdsyn/metrics.hpp"
#include "test_support.hpp"

using namespace mdsyn;
using namespace mdsyn::metrics;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Riemann sum of recall(e) over [0, t] on a fine midpoint grid.
double numeric_auc(const std::vector<double>& errors, double t, int steps = 200000) {
  double area = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double x = (i + 0.5) * t / steps;
    std::size_t below = 0;
    for (double e : errors) below += e <= x;
    area += static_cast<double>(below) / errors.size();
  }
  return 100.0 * area / steps;
}

}  // namespace

TEST_CASE("AUC hand case") {
  CHECK(std::abs(auc({1.0, 6.0, 25.0}, 10.0) - 130.0 / 3.0) < 1e-9);
}

TEST_CASE("AUC edge values") {
  CHECK(auc({0.0, 0.0}, 5.0) == 100.0);
  CHECK(auc({kInf, 20.0}, 5.0) == 0.0);
  CHECK(auc({5.0}, 5.0) == 0.0);
  CHECK(auc({0.0, kInf}, 3.0) == 50.0);
  CHECK_THROWS_AS(auc({}, 5.0), Error);
  CHECK_THROWS_AS(auc({1.0}, 0.0), Error);
  CHECK_THROWS_AS(auc({std::nan("")}, 1.0), Error);
}

TEST_CASE("AUC equals the numeric integral of recall") {
  Rng rng = derive_rng(1, "auc");
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> errs;
    for (int i = 0; i < 25; ++i) errs.push_back(uniform01(rng) < 0.1 ? kInf : uniform(rng, 0, 30));
    for (double t : {5.0, 10.0, 20.0}) CHECK(auc(errs, t) == doctest::Approx(numeric_auc(errs, t)).epsilon(1e-3));
  }
}

TEST_CASE("AUC is monotone in the threshold for sorted-error recall") {
  const std::vector<double> errs{0.5, 2, 4, 8, 16};
  const AucTable t = auc_table(errs, {3, 5, 10});
  CHECK(t.samples == 5);
  CHECK(t.values[0] <= t.values[1]);
}

TEST_CASE("PSNR cap fires only for identical images") {
  const ImageU8 a = testing::textured_image(32, 32, 1);
  CHECK(psnr(a, a) == kPsnrCapDb);
  ImageU8 b = a;
  b.data()[0] ^= 1;
  const double p = psnr(a, b);
  CHECK(p < kPsnrCapDb);
  CHECK(p == doctest::Approx(10 * std::log10(255.0 * 255.0 * a.size())));
  CHECK_THROWS_AS(psnr(a, ImageU8(31, 32, 3)), Error);
}

TEST_CASE("SSIM identity and constant images") {
  const ImageU8 a = to_u8(to_gray(testing::textured_image(40, 30, 2)));
  CHECK(std::abs(ssim(a, a) - 1.0) < 1e-9);
  const ImageU8 c1(20, 20, 1, 100), c2(20, 20, 1, 150);
  const double k1 = 0.01 * 255;
  const double c = k1 * k1;
  CHECK(ssim(c1, c2) == doctest::Approx((2.0 * 100 * 150 + c) / (100.0 * 100 + 150.0 * 150 + c)));
  CHECK_THROWS_AS(ssim(ImageU8(8, 8, 1), ImageU8(8, 8, 1)), Error);
  CHECK_THROWS_AS(ssim(ImageU8(20, 20, 3), ImageU8(20, 20, 3)), Error);
}

TEST_CASE("histograms are normalized") {
  const ImageU8 img = testing::textured_image(33, 17, 3);
  for (int bins : {2, 16, 256}) {
    const auto h = intensity_histogram(img, bins);
    double s = 0;
    for (double v : h) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  const auto flat = intensity_histogram(ImageU8(5, 5, 1, 77), 256);
  CHECK(flat[77] == 1.0);
}

TEST_CASE("match classification against a homography") {
  MatchSet ms;
  ms.matches = {{0, 0, 10, 0, 1}, {5, 5, 15, 7.9, 1}, {1, 1, 30, 1, 1}};
  const MatchStats s = classify_matches(ms, Homography::translation(10, 0));
  CHECK(s.correct == 2);
  CHECK(s.precision == doctest::Approx(2.0 / 3.0));
  CHECK(classify_matches(MatchSet{}, Homography::identity()).precision == 0.0);
}

TEST_CASE("match classification against a pose") {
  const CameraModel cam{100, 100, 50, 50, 100, 100};
  Pose p;
  p.t = Vec3(1, 0, 0);
  MatchSet ms;
  ms.matches = {{10, 20, 40, 20, 1}, {10, 20, 40, 25, 1}};
  const MatchStats s = classify_matches(ms, PoseGroundTruth{p, cam, cam});
  CHECK(s.correct == 1);
}

TEST_CASE("aggregation is independent of input order") {
  std::vector<PairResult> rs{{"p2", "rgb-event", 4.0}, {"p1", "rgb-event", 1.0}, {"p3", "rgb-depth", 0.0}};
  rs.push_back({"p0", "rgb-event", 0.0, true, "EstimationFailed"});
  std::vector<PairResult> rev(rs.rbegin(), rs.rend());
  const EvalReport a = aggregate_report(rs, Task::Homography, {3, 5, 10});
  const EvalReport b = aggregate_report(rev, Task::Homography, {3, 5, 10});
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.pairs.front().modality_case == "rgb-depth");
  const CaseSummary& ev = a.cases.at("rgb-event");
  CHECK(ev.failures == 1);
  CHECK(ev.auc.values[0] == doctest::Approx(auc({kInf, 1.0, 4.0}, 3.0)));
  CHECK_THROWS_AS(aggregate_report({}, Task::Pose, {5}), Error);
}

TEST_CASE("report serialization") {
  const EvalReport r = aggregate_report({{"a", "rgb-rgb", 2.0}}, Task::Pose, {5, 10, 20});
  const auto j = r.to_json();
  CHECK(j["mdsyn_report"] == 1);
  CHECK(j["unit"] == "deg");
  CHECK(j["auc"]["rgb-rgb"]["5"].get<double>() == doctest::Approx(60.0));
  std::ostringstream csv;
  r.write_csv(csv);
  CHECK(csv.str() == "case,AUC@5deg,AUC@10deg,AUC@20deg,pairs,failures,mean_precision,mean_runtime_ms\n"
                     "rgb-rgb,60,80,90,1,0,0,0\n");
  std::ostringstream svg;
  r.write_svg(svg, "pose");
  CHECK(svg.str().find("<svg") == 0);
}

TEST_CASE("shortest round-trip formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(5.0) == "5");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(kInf) == "inf");
}
