#include <doctest.h>

#include <cmath>
#include <limits>

#include "mdsyn/augment.hpp"
#include "mdsyn/estimators.hpp"
#include "mdsyn/matcher.hpp"
#include "test_support.hpp"

using namespace mdsyn;
using namespace mdsyn::matcher;

namespace {

std::vector<Descriptor> random_descriptors(Rng& rng, int n) {
  std::vector<Descriptor> out(n);
  for (auto& d : out) {
    double norm = 0;
    for (float& v : d) {
      v = static_cast<float>(uniform01(rng));
      norm += v * v;
    }
    for (float& v : d) v = static_cast<float>(v / std::sqrt(norm));
  }
  return out;
}

// O(n^2) reference with the same ratio rule.
std::vector<IndexMatch> brute_force_mnn(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b,
                                        double ratio) {
  auto dist = [](const Descriptor& x, const Descriptor& y) {
    double s = 0;
    for (int k = 0; k < kDescriptorSize; ++k) s += (double(x[k]) - y[k]) * (double(x[k]) - y[k]);
    return std::sqrt(s);
  };
  auto nearest = [&](const Descriptor& q, const std::vector<Descriptor>& set, double& d1, double& d2) {
    int best = -1;
    d1 = d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < set.size(); ++j) {
      const double d = dist(q, set[j]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = static_cast<int>(j);
      } else if (d < d2) {
        d2 = d;
      }
    }
    return best;
  };
  std::vector<IndexMatch> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d1, d2, e1, e2;
    const int j = nearest(a[i], b, d1, d2);
    if (j < 0 || nearest(b[j], a, e1, e2) != static_cast<int>(i)) continue;
    if (std::isfinite(d2) && !(d1 < ratio * d2)) continue;
    if (std::isfinite(e2) && !(e1 < ratio * e2)) continue;
    out.push_back({static_cast<int>(i), j, d1});
  }
  return out;
}

}  // namespace

TEST_CASE("mutual nearest neighbours equal the brute-force oracle") {
  Rng rng = derive_rng(1, "mnn");
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_descriptors(rng, 1 + static_cast<int>(uniform_index(rng, 60)));
    const auto b = random_descriptors(rng, 1 + static_cast<int>(uniform_index(rng, 60)));
    for (double ratio : {1.0, 0.9}) {
      const auto got = mutual_nn(a, b, ratio);
      const auto want = brute_force_mnn(a, b, ratio);
      REQUIRE(got.size() == want.size());
      for (std::size_t k = 0; k < got.size(); ++k) {
        CHECK(got[k].a == want[k].a);
        CHECK(got[k].b == want[k].b);
        CHECK(got[k].distance == doctest::Approx(want[k].distance).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("mutual nearest neighbours on identical sets") {
  Rng rng = derive_rng(2, "mnn-self");
  const auto a = random_descriptors(rng, 30);
  const auto m = mutual_nn(a, a, 0.9);
  REQUIRE(m.size() == 30);
  for (const auto& x : m) CHECK(x.a == x.b);
  CHECK(mutual_nn(a, {}, 0.9).empty());
}

TEST_CASE("detector output is ordered, bounded and deterministic") {
  const ImageF g = to_gray(testing::textured_image(160, 120, 4));
  DetectorConfig cfg;
  cfg.max_keypoints = 50;
  const auto kps = detect(g, cfg);
  REQUIRE(kps.size() == 50);
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].response >= kps[i].response);
  for (const auto& k : kps) {
    CHECK(k.x >= kPatchRadius);
    CHECK(k.y >= kPatchRadius);
    CHECK(k.x < 160 - kPatchRadius);
    CHECK(k.y < 120 - kPatchRadius);
  }
  CHECK(detect(g, cfg) == kps);
  CHECK(detect(ImageF(50, 50, 1, 0.3f)).empty());
}

TEST_CASE("descriptor contract") {
  const ImageF g = to_gray(testing::textured_image(100, 100, 5));
  const auto kps = detect(g);
  REQUIRE(!kps.empty());
  const Descriptor d = describe(g, kps.front());
  double norm = 0;
  for (float v : d) {
    CHECK(v >= 0.0f);
    norm += double(v) * v;
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
  try {
    describe(g, {2, 50, 1.0});
    FAIL("expected BorderKeypoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BorderKeypoint);
  }
  try {
    describe(ImageF(40, 40, 1, 0.5f), {20, 20, 1.0});
    FAIL("expected FlatPatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FlatPatch);
  }
  // Affine intensity changes leave the descriptor unchanged.
  ImageF g2 = g;
  for (float& v : g2.data()) v = 0.2f + 0.5f * v;
  const Descriptor d2 = describe(g2, kps.front());
  for (int k = 0; k < kDescriptorSize; ++k) CHECK(d2[k] == doctest::Approx(d[k]).epsilon(1e-4));
}

TEST_CASE("self matching yields exact correspondences") {
  const ImageF g = to_gray(testing::textured_image(200, 150, 6));
  const MatchSet m = match_images(g, g);
  CHECK(m.size() > 50);
  for (const Match& x : m.matches) {
    CHECK(x.xa == x.xb);
    CHECK(x.ya == x.yb);
    CHECK(x.score == doctest::Approx(1.0));
  }
}

TEST_CASE("baseline recovers a moderate homography") {
  const ImageF a = to_float(testing::textured_image(320, 240, 7));
  Mat3 m;
  m << 0.95, 0.05, 8, -0.04, 0.97, 5, 1e-5, 2e-5, 1;
  const Homography h(m);
  const ImageF b = augment::warp_image(a, h, 320, 240);
  ImageF ga(320, 240, 1), gb(320, 240, 1);
  for (int y = 0; y < 240; ++y)
    for (int x = 0; x < 320; ++x) {
      ga(x, y) = (a(x, y, 0) + a(x, y, 1) + a(x, y, 2)) / 3;
      gb(x, y) = (b(x, y, 0) + b(x, y, 1) + b(x, y, 2)) / 3;
    }
  const MatchSet ms = match_images(ga, gb);
  const auto fit = estimators::ransac_homography(ms, estimators::default_homography_ransac());
  CHECK(estimators::corner_error(fit.model, h, 320, 240) < 2.0);
}

TEST_CASE("correspondence files round-trip") {
  MatchSet ms{"imgA", "imgB", {{1.5, 2, 3, 4.25, 0.5}, {0, 0, 9.125, 1e-3, 1}}};
  const std::string text = format_matches(ms);
  CHECK(text.rfind("MDSYN-MATCHES v1 imgA imgB\n", 0) == 0);
  CHECK(parse_matches(text) == ms);
  testing::TempDir tmp;
  write_matches(tmp / "m.txt", ms);
  CHECK(ingest_matches(tmp / "m.txt") == ms);
  CHECK_THROWS_AS(ingest_matches(tmp / "none.txt"), Error);
}

TEST_CASE("correspondence file errors name the line") {
  auto code_and_message = [](const std::string& text, std::optional<ImageBounds> b = std::nullopt) {
    try {
      parse_matches(text, b);
    } catch (const Error& e) {
      return std::make_pair(e.code(), std::string(e.what()));
    }
    return std::make_pair(ErrorCode::InvalidArgument, std::string("no error"));
  };
  auto [c1, m1] = code_and_message("BAD HEADER\n");
  CHECK(c1 == ErrorCode::ParseError);
  CHECK(m1.find("line 1") != std::string::npos);
  auto [c2, m2] = code_and_message("MDSYN-MATCHES v1 a b\n1 2 3 4 0.5\n1 2 x 4 0.5\n");
  CHECK(c2 == ErrorCode::ParseError);
  CHECK(m2.find("line 3") != std::string::npos);
  auto [c3, m3] = code_and_message("MDSYN-MATCHES v1 a b\n1 2 3 4 1.5\n");
  CHECK(c3 == ErrorCode::BoundsError);
  auto [c4, m4] = code_and_message("MDSYN-MATCHES v1 a b\n1 2 30 4 0.5\n", ImageBounds{10, 10, 10, 10});
  CHECK(c4 == ErrorCode::BoundsError);
  CHECK(m4.find("line 2") != std::string::npos);
  CHECK(parse_matches("MDSYN-MATCHES v1 a b\n-0.5 9.5 0 0 0\n", ImageBounds{10, 10, 10, 10}).size() == 1);
}

TEST_CASE("baseline identity names its parameters") {
  CHECK(baseline_identity({}) == "baseline-harris-mnn(max_kp=2048,nms=4,ratio=0.9)");
}
