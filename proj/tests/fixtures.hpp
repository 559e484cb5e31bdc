#pragma once

#include <filesystem>
#include <string>

#include "mdsyn/augment.hpp"
#include "mdsyn/manifest.hpp"
#include "mdsyn/matcher.hpp"
#include "test_support.hpp"

namespace mdsyn::testing {

struct PlanarDatasetOptions {
  int pairs = 5;
  int scenes = 1;
  int width = 320;
  int height = 240;
  std::uint64_t seed = 1;
};

// Patterned RGB pairs related by known homographies, written under `dir` with
// a manifest at dir/manifest.json. Pair i lives in scene "s<i % scenes>".
inline engine::PairManifest build_planar_dataset(const std::filesystem::path& dir, const PlanarDatasetOptions& o = {}) {
  std::filesystem::create_directories(dir / "images");
  engine::PairManifest m;
  m.base_dir = dir;
  for (int s = 0; s < o.scenes; ++s) m.scenes.push_back("s" + std::to_string(s));
  augment::WarpConfig warp{0.04, 5.0, 0.05, 0.03, o.seed};
  for (int i = 0; i < o.pairs; ++i) {
    const std::string scene = "s" + std::to_string(i % o.scenes);
    const ImageU8 a = patterned_image(o.width, o.height, o.seed * 1000 + i);
    Rng rng = derive_rng(o.seed, "pair" + std::to_string(i));
    const Homography h = augment::sample_warp(warp, o.width, o.height, rng).total;
    const ImageU8 b = augment::warp_image(a, h, o.width, o.height);
    const std::string ia = "p" + std::to_string(i) + "a", ib = "p" + std::to_string(i) + "b";
    write_png(dir / "images" / (ia + ".png"), a);
    write_png(dir / "images" / (ib + ".png"), b);
    m.images.push_back({ia, "images/" + ia + ".png", scene});
    m.images.push_back({ib, "images/" + ib + ".png", scene});
    engine::PairEntry p;
    p.id = "pair" + std::to_string(i);
    p.a = ia;
    p.b = ib;
    p.scene = scene;
    p.label.kind = engine::LabelKind::Homography;
    p.label.homography = h.matrix();
    m.pairs.push_back(p);
  }
  m.save(dir / "manifest.json");
  return engine::PairManifest::load(dir / "manifest.json");
}

// Exact correspondences for every homography pair on a 16 px grid, written as
// <dir>/<pair id>.txt. Assumes the evaluation keeps the original resolution.
inline void write_perfect_matches(const engine::PairManifest& m, const std::filesystem::path& dir, int width,
                                  int height) {
  std::filesystem::create_directories(dir);
  for (const engine::PairEntry& p : m.pairs) {
    const Homography h(*p.label.homography);
    MatchSet ms{p.a, p.b, {}};
    for (int y = 8; y < height; y += 16) {
      for (int x = 8; x < width; x += 16) {
        const Vec2 q = apply_homography(h, Vec2(x, y));
        if (q.x() < 0 || q.y() < 0 || q.x() > width - 1 || q.y() > height - 1) continue;
        ms.matches.push_back({double(x), double(y), q.x(), q.y(), 1.0});
      }
    }
    matcher::write_matches(dir / (p.id + ".txt"), ms);
  }
}

}  // namespace mdsyn::testing
