#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "mdsyn/process.hpp"

using namespace mdsyn;
using json = nlohmann::ordered_json;

namespace {

ProcessResult cli(const std::string& args) { return run_shell(std::string(MDSYN_CLI) + " " + args, 120.0); }

void write_config(const std::filesystem::path& path, const json& j) { std::ofstream(path) << j.dump(2); }

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(cli("").exit_code == 2);
  CHECK(cli("frobnicate").exit_code == 2);
  CHECK(cli("generate").exit_code == 2);
  CHECK(cli("--help").exit_code == 0);
}

TEST_CASE("cli generator failure exit code") {
  testing::TempDir tmp;
  testing::build_planar_dataset(tmp / "data", {1, 1, 32, 32, 20});
  write_config(tmp / "cfg.json",
               {{"manifest", "data/manifest.json"},
                {"cache", "cache"},
                {"generators", json::array({{{"name", "boom"},
                                             {"version", "1"},
                                             {"modality", "depth"},
                                             {"command", "echo failed-loudly; exit 1 # {input_dir} {output_dir}"}}})}});
  const ProcessResult r = cli("generate --config " + (tmp / "cfg.json").string() + " --modality depth");
  CHECK(r.exit_code == 11);
  CHECK(r.output.find("failed-loudly") != std::string::npos);
  CHECK(cli("generate --config " + (tmp / "cfg.json").string() + " --modality thermal").exit_code == 14);
  CHECK(cli("generate --config " + (tmp / "missing.json").string() + " --modality depth").exit_code == 10);
}

TEST_CASE("cli evaluation exit codes") {
  testing::TempDir tmp;
  testing::build_planar_dataset(tmp / "data", {1, 1, 32, 32, 21});
  const std::string m = (tmp / "data" / "manifest.json").string();
  // Every pair is in the training split.
  CHECK(cli("evaluate-homography --manifest " + m + " --out " + (tmp / "out").string()).exit_code == 21);
  std::filesystem::create_directories(tmp / "matches");
  std::ofstream(tmp / "matches" / "pair0.txt") << "not a match file\n";
  CHECK(cli("evaluate-homography --all-splits --manifest " + m + " --matches " + (tmp / "matches").string() +
            " --out " + (tmp / "out").string())
            .exit_code == 22);
}

TEST_CASE("cli pipeline is deterministic") {
  testing::TempDir tmp;
  testing::build_planar_dataset(tmp / "data", {2, 1, 96, 72, 22});
  write_config(tmp / "cfg.json", {{"manifest", "data/manifest.json"}, {"cache", "cache"}, {"output", "out"},
                                  {"seed", 3}, {"resize", 96}});
  const std::string cfg = " --config " + (tmp / "cfg.json").string();
  REQUIRE(cli("generate --modality event" + cfg).exit_code == 0);
  const std::string ev = (tmp / "out" / "manifest.event.json").string();
  REQUIRE(cli("pair --modalities event --manifest " + ev + cfg).exit_code == 0);
  const std::string pairs = (tmp / "out" / "manifest.pairs.json").string();
  CHECK(json::parse(testing::slurp(pairs))["pairs"].size() == 4);
  REQUIRE(cli("split --test-scenes s0 --manifest " + pairs + cfg).exit_code == 0);
  const std::string split = (tmp / "out" / "manifest.split.json").string();
  REQUIRE(cli("evaluate-homography --manifest " + split + cfg + " --out " + (tmp / "r1").string()).exit_code == 0);
  REQUIRE(cli("evaluate-homography --workers 2 --manifest " + split + cfg + " --out " + (tmp / "r2").string())
              .exit_code == 0);
  const json r1 = json::parse(testing::slurp(tmp / "r1" / "homography_report.json"));
  const json r2 = json::parse(testing::slurp(tmp / "r2" / "homography_report.json"));
  // Worker count is recorded in the config block but must not change the results.
  CHECK(r1["auc"] == r2["auc"]);
  CHECK(r1["pairs"] == r2["pairs"]);
  CHECK(r1["cases"].contains("rgb-event"));
  REQUIRE(cli("evaluate-homography --manifest " + split + cfg + " --out " + (tmp / "r3").string()).exit_code == 0);
  CHECK(testing::slurp(tmp / "r1" / "homography_report.json") == testing::slurp(tmp / "r3" / "homography_report.json"));
  CHECK(testing::slurp(tmp / "r1" / "homography_report.csv") == testing::slurp(tmp / "r3" / "homography_report.csv"));

  // Sampling draws from training pairs, so use the manifest before the split.
  const ProcessResult s1 = cli("sample --modalities event --count 20 --manifest " + pairs + cfg);
  const ProcessResult s2 = cli("sample --modalities event --count 20 --manifest " + pairs + cfg);
  CHECK(s1.exit_code == 0);
  CHECK(s1.output == s2.output);
  CHECK(cli("sample --modalities depth --manifest " + pairs + cfg).exit_code == 16);
  CHECK(cli("sample --modalities event --manifest " + split + cfg).exit_code == 16);
}

TEST_CASE("cli quality and stats") {
  testing::TempDir tmp;
  const ImageU8 img = testing::textured_image(40, 30, 23);
  write_png(tmp / "a.png", img);
  const ProcessResult q = cli("quality --reference " + (tmp / "a.png").string() + " --candidate " +
                              (tmp / "a.png").string() + " --out " + (tmp / "q.json").string());
  REQUIRE(q.exit_code == 0);
  const json qj = json::parse(testing::slurp(tmp / "q.json"));
  CHECK(qj["psnr_db"] == 99.0);
  CHECK(qj["ssim"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  ImageU8 flat(20, 10, 1);
  for (std::size_t i = 0; i < flat.size(); ++i) flat.data()[i] = 77;
  write_png(tmp / "flat.png", flat);
  const ProcessResult s = cli("stats --bins 8 --images " + (tmp / "flat.png").string() + " --out " +
                              (tmp / "s.json").string());
  REQUIRE(s.exit_code == 0);
  const json sj = json::parse(testing::slurp(tmp / "s.json"));
  const auto h = sj["images"][(tmp / "flat.png").string()].get<std::vector<double>>();
  CHECK(h == std::vector<double>{0, 0, 1, 0, 0, 0, 0, 0});
}
