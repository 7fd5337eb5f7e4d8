#include <doctest.h>

#include <filesystem>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "planefilter/cli.hpp"
#include "planefilter/io.hpp"
#include "planefilter/synth.hpp"
#include "support.hpp"

using namespace planefilter;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome invoke(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"planefilter"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : store) argv.push_back(s.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "planefilter_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string s(const fs::path& p) { return p.string(); }

fs::path synth_fixture(const fs::path& dir, const Json& spec) {
  write_json(dir / "spec.json", spec);
  const Outcome o = invoke({"synth", "--spec", s(dir / "spec.json"), "--out-dir", s(dir / "fx")});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  return dir / "fx";
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(invoke({}).code == cli::kExitParse);
  CHECK(invoke({"bogus"}).code == cli::kExitParse);
  CHECK(invoke({"filter", "--matches", "x.csv"}).code == cli::kExitParse);
  const Outcome help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("filter") != std::string::npos);
}

TEST_CASE("filter: file errors") {
  const fs::path dir = workdir("filter_errors");
  const Outcome missing =
      invoke({"filter", "--matches", s(dir / "absent.csv"), "--out", s(dir / "r.json")});
  CHECK(missing.code == cli::kExitIo);
  CHECK_FALSE(missing.err.empty());

  write_text(dir / "bad.csv", "x1,y1,x2,y2\n1,2,3\n");
  const Outcome bad = invoke({"filter", "--matches", s(dir / "bad.csv"), "--out", s(dir / "r.json")});
  CHECK(bad.code == cli::kExitParse);
  CHECK(bad.err.find(":2:") != std::string::npos);

  write_text(dir / "ok.csv", "x1,y1,x2,y2\n");
  CHECK(invoke({"filter", "--matches", s(dir / "ok.csv"), "--out", s(dir / "r.json"), "--tl",
                "-1"})
            .code == cli::kExitParse);
  CHECK(invoke({"filter", "--matches", s(dir / "ok.csv"), "--out",
                s(dir / "no_such_dir" / "r.json")})
            .code == cli::kExitIo);
}

TEST_CASE("filter: empty match file") {
  const fs::path dir = workdir("filter_empty");
  write_text(dir / "m.csv", "x1,y1,x2,y2\n");
  const std::string m = s(dir / "m.csv"), out = s(dir / "r.json");
  for (const Outcome& o : {invoke({"filter", "--matches", m, "--out", out}),
                           invoke({"filter", "--matches", m, "--out", out, "--miho"})}) {
    REQUIRE(o.code == 0);
    const ResultFile r = result_from_json(read_json(out));
    CHECK(r.records.empty());
    CHECK(r.planes.empty());
  }
}

TEST_CASE("filter: two-plane fixture and determinism") {
  const fs::path dir = workdir("filter_scene");
  const fs::path fx = synth_fixture(
      dir, {{"planes", 2}, {"matches_per_plane", 100}, {"outlier_fraction", 0.2}, {"seed", 9}});
  const auto scene_labels = read_text(fx / "labels.csv");

  for (const bool miho : {false, true}) {
    const std::string a = s(dir / "a.json"), b = s(dir / "b.json");
    if (miho) {
      REQUIRE(invoke({"filter", "--matches", s(fx / "matches.csv"), "--out", a, "--seed", "4",
                      "--miho"})
                  .code == 0);
      REQUIRE(invoke({"filter", "--matches", s(fx / "matches.csv"), "--out", b, "--seed", "4",
                      "--miho"})
                  .code == 0);
    } else {
      REQUIRE(invoke({"filter", "--matches", s(fx / "matches.csv"), "--out", a, "--seed", "4"})
                  .code == 0);
      REQUIRE(invoke({"filter", "--matches", s(fx / "matches.csv"), "--out", b, "--seed", "4"})
                  .code == 0);
    }
    CHECK(read_text(a) == read_text(b));

    const ResultFile r = result_from_json(read_json(a));
    std::istringstream labels(scene_labels);
    std::string line;
    std::getline(labels, line);
    std::size_t inliers_kept = 0, outliers_dropped = 0, outliers = 0;
    for (const auto& rec : r.records) {
      std::getline(labels, line);
      const bool inlier = line.substr(line.find(',') + 1) != "-1";
      if (inlier) {
        inliers_kept += rec.kept;
      } else {
        ++outliers;
        outliers_dropped += !rec.kept;
      }
    }
    CHECK(r.records.size() == 250);
    CHECK(inliers_kept == 200);
    CHECK(double(outliers_dropped) >= 0.9 * double(outliers));
  }
}

TEST_CASE("refine: error paths") {
  const fs::path dir = workdir("refine_errors");
  write_text(dir / "m.csv", "x1,y1,x2,y2\n");
  const Outcome missing = invoke({"refine", "--matches", s(dir / "m.csv"), "--img1",
                                  s(dir / "none.png"), "--img2", s(dir / "none.png"), "--out",
                                  s(dir / "r.json")});
  CHECK(missing.code == cli::kExitImage);
  write_text(dir / "junk.png", "not an image");
  CHECK(invoke({"refine", "--matches", s(dir / "m.csv"), "--img1", s(dir / "junk.png"), "--img2",
                s(dir / "junk.png"), "--out", s(dir / "r.json")})
            .code == cli::kExitImage);
  CHECK(invoke({"refine", "--img1", s(dir / "junk.png"), "--img2", s(dir / "junk.png"), "--out",
                s(dir / "r.json")})
            .code == cli::kExitParse);
}

TEST_CASE("refine: identical images keep exact matches") {
  const fs::path dir = workdir("refine_identity");
  const fs::path fx = synth_fixture(
      dir, {{"kind", "render"}, {"width", 200}, {"height", 160}, {"count", 12}, {"seed", 2}});
  REQUIRE(invoke({"refine", "--matches", s(fx / "matches.csv"), "--img1", s(fx / "img1.png"),
                  "--img2", s(fx / "img1.png"), "--out", s(dir / "r.json")})
              .code == 0);
  const ResultFile r = result_from_json(read_json(dir / "r.json"));
  const auto before = read_matches_csv(fx / "matches.csv");
  REQUIRE(r.records.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(r.records[i].refined);
    CHECK(r.records[i].match == before[i]);
  }
}

TEST_CASE("refine: perturbed keypoints move toward ground truth") {
  const fs::path dir = workdir("refine_render");
  const fs::path fx = synth_fixture(dir, {{"kind", "render"},
                                          {"homography", {{1, 0, 2.5}, {0, 1, -1.5}, {0, 0, 1}}},
                                          {"count", 40},
                                          {"seed", 5}});
  const auto truth = read_matches_csv(fx / "matches.csv");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Match> noisy = truth;
  for (auto& m : noisy) m.p2 += Point2(u(rng), u(rng));
  write_matches_csv(dir / "noisy.csv", noisy);
  REQUIRE(invoke({"refine", "--matches", s(dir / "noisy.csv"), "--img1", s(fx / "img1.png"),
                  "--img2", s(fx / "img2.png"), "--out", s(dir / "r.json")})
              .code == 0);
  const ResultFile r = result_from_json(read_json(dir / "r.json"));
  const Eigen::Matrix3d H = matrix_from_json(read_json(fx / "gt.json").at("H"), "H");
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    before += transfer_error(H, noisy[i]);
    after += transfer_error(H, r.records[i].match);
  }
  CHECK(after <= 0.5 * before);
}

TEST_CASE("eval: exact base and malformed ground truth") {
  const fs::path dir = workdir("eval");
  const fs::path fx = synth_fixture(dir, {{"kind", "pose"}, {"matches_per_plane", 60}, {"seed", 3}});
  const std::string m = s(fx / "matches.csv");
  REQUIRE(invoke({"eval", "--base", m, "--pred", m, "--gt", s(fx / "gt.json"), "--out",
                  s(dir / "rep.json")})
              .code == 0);
  const Json rep = read_json(dir / "rep.json");
  CHECK(rep.at("recall") == 1.0);
  CHECK(rep.at("precision") == 1.0);
  CHECK(rep.at("filtered") == 0.0);

  const auto matches = read_matches_csv(fx / "matches.csv");
  Json lib = report_to_json(evaluate(matches, matches, gt_from_json(read_json(fx / "gt.json"))));
  lib["mode"] = "pose";
  CHECK(dump_json(lib) == read_text(dir / "rep.json"));

  write_text(dir / "bad_gt.json", R"({"K1": [[1, 0], [0, 1]]})");
  CHECK(invoke({"eval", "--base", m, "--pred", m, "--gt", s(dir / "bad_gt.json"), "--out",
                s(dir / "x.json")})
            .code == cli::kExitParse);
  write_text(dir / "not_json.json", "{");
  CHECK(invoke({"eval", "--base", m, "--pred", m, "--gt", s(dir / "not_json.json"), "--out",
                s(dir / "x.json")})
            .code == cli::kExitParse);
  CHECK(invoke({"eval", "--base", m, "--pred", m, "--gt", s(fx / "gt.json"), "--mode",
                "homography", "--out", s(dir / "x.json")})
            .code == cli::kExitParse);
  CHECK(invoke({"eval", "--base", m, "--pred", m, "--gt", s(fx / "gt.json"), "--mode", "affine",
                "--out", s(dir / "x.json")})
            .code == cli::kExitParse);
}

TEST_CASE("filter output feeds refine and eval") {
  const fs::path dir = workdir("pipeline");
  const fs::path fx = synth_fixture(
      dir, {{"kind", "render"}, {"width", 320}, {"height", 240}, {"count", 30}, {"seed", 8}});
  const std::string res = s(dir / "filter.json");
  REQUIRE(invoke({"filter", "--matches", s(fx / "matches.csv"), "--out", res}).code == 0);
  REQUIRE(invoke({"refine", "--from-result", res, "--img1", s(fx / "img1.png"), "--img2",
                  s(fx / "img2.png"), "--out", s(dir / "refined.json")})
              .code == 0);
  const ResultFile filtered = result_from_json(read_json(res));
  const ResultFile refined = result_from_json(read_json(dir / "refined.json"));
  CHECK(refined.records.size() == filtered.records.size());
  CHECK(result_to_json(refined).at("planes") == result_to_json(filtered).at("planes"));
  CHECK(refined.config.at("upstream") == filtered.config);

  REQUIRE(invoke({"eval", "--base", s(fx / "matches.csv"), "--pred", res, "--gt",
                  s(fx / "gt.json"), "--mode", "homography", "--out", s(dir / "rep.json")})
              .code == 0);
  const Json rep = read_json(dir / "rep.json");
  CHECK(rep.at("count") == filtered.kept_matches().size());
  CHECK(rep.contains("homography_error"));
}

TEST_CASE("synth: determinism and valid ground truth") {
  const fs::path dir = workdir("synth");
  const Json spec = {{"kind", "pose"}, {"matches_per_plane", 50}, {"noise_sigma", 0.5},
                     {"outlier_fraction", 0.25}, {"seed", 12}};
  write_json(dir / "spec.json", spec);
  REQUIRE(invoke({"synth", "--spec", s(dir / "spec.json"), "--out-dir", s(dir / "a")}).code == 0);
  REQUIRE(invoke({"synth", "--spec", s(dir / "spec.json"), "--out-dir", s(dir / "b")}).code == 0);
  for (const char* f : {"matches.csv", "labels.csv", "gt.json", "spec.json"}) {
    CHECK(read_text(dir / "a" / f) == read_text(dir / "b" / f));
  }
  const GroundTruth gt = gt_from_json(read_json(dir / "a" / "gt.json"));
  REQUIRE(std::holds_alternative<PoseGroundTruth>(gt));
  CHECK_NOTHROW(validate(std::get<PoseGroundTruth>(gt)));

  Json echo = read_json(dir / "a" / "spec.json");
  CHECK(echo.at("kind") == "pose");
  echo.erase("kind");
  SceneSpec expected;
  expected.matches_per_plane = 50;
  expected.noise_sigma = 0.5;
  expected.outlier_fraction = 0.25;
  expected.seed = 12;
  CHECK(spec_from_json(echo) == expected);

  write_json(dir / "bad.json", {{"kind", "sphere"}});
  CHECK(invoke({"synth", "--spec", s(dir / "bad.json"), "--out-dir", s(dir / "c")}).code ==
        cli::kExitParse);
  write_json(dir / "bad2.json", {{"planes", -2}});
  CHECK(invoke({"synth", "--spec", s(dir / "bad2.json"), "--out-dir", s(dir / "c")}).code != 0);
}
