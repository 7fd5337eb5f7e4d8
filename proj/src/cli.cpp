#include "planefilter/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "planefilter/errors.hpp"
#include "planefilter/eval.hpp"
#include "planefilter/io.hpp"
#include "planefilter/miho.hpp"
#include "planefilter/mop.hpp"
#include "planefilter/ncc.hpp"
#include "planefilter/synth.hpp"

namespace planefilter::cli {

namespace fs = std::filesystem;

namespace {

struct FilterArgs {
  std::string matches, out;
  bool miho = false;
  bool no_fix_rotation = false;
  std::uint64_t seed = 0;
  std::optional<int> max_iters;
  std::optional<double> tl;
  std::optional<std::size_t> n_min;
};

struct RefineArgs {
  std::string matches, img1, img2, out, from_result;
  int radius = 10;
};

struct EvalArgs {
  std::string base, pred, gt, mode = "pose", out;
  bool squared = false;
  std::optional<int> width, height;
};

struct SynthArgs {
  std::string spec, out_dir;
};

GrayImage load_image_or_decode_error(const std::string& path) {
  try {
    return load_image(path);
  } catch (const IoError& e) {
    throw ImageDecodeError(e.what());
  }
}

int cmd_filter(const FilterArgs& a, int threads) {
  const auto matches = read_matches_csv(a.matches);
  MopConfig cfg = a.miho ? MopConfig::miho() : MopConfig::plain();
  if (a.tl) cfg.with_tl(*a.tl);
  if (a.max_iters) cfg.c_max = *a.max_iters;
  if (a.n_min) cfg.n_min = *a.n_min;
  cfg.seed = a.seed;
  cfg.threads = threads;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }

  MihoOptions opts;
  opts.fix_rotation = !a.no_fix_rotation;
  const FilterResult res = a.miho ? mop_miho_filter(matches, cfg, opts) : mop_filter(matches, cfg);

  ResultFile rf;
  rf.config = {{"command", "filter"}, {"miho", a.miho},        {"seed", cfg.seed},
               {"t_l", cfg.t_l},      {"t_h", cfg.t_h},        {"n_min", cfg.n_min},
               {"c_min", cfg.c_min},  {"c_max", cfg.c_max},    {"c_f_max", cfg.c_f_max},
               {"fix_rotation", a.miho && opts.fix_rotation}};
  rf.alpha_star = res.alpha_star;
  rf.planes = res.planes;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    MatchRecord r;
    r.index = i;
    r.plane = res.assignment.empty() ? -1 : res.assignment[i];
    r.kept = res.passthrough || r.plane >= 0;
    r.match = matches[i];
    rf.records.push_back(r);
  }
  write_json(a.out, result_to_json(rf));
  return kExitOk;
}

int cmd_refine(const RefineArgs& a, int threads) {
  if (a.matches.empty() && a.from_result.empty()) {
    throw ParseError("refine needs --matches or --from-result");
  }
  if (a.radius < 1) throw ParseError("--radius must be >= 1");
  ResultFile rf;
  if (!a.from_result.empty()) {
    rf = result_from_json(read_json(a.from_result));
    if (!a.matches.empty()) {
      const auto ms = read_matches_csv(a.matches);
      if (ms.size() != rf.records.size()) {
        throw ParseError("--matches and --from-result disagree on the match count");
      }
      for (std::size_t i = 0; i < ms.size(); ++i) rf.records[i].match = ms[i];
    }
  } else {
    const auto ms = read_matches_csv(a.matches);
    for (std::size_t i = 0; i < ms.size(); ++i) {
      MatchRecord r;
      r.index = i;
      r.match = ms[i];
      rf.records.push_back(r);
    }
  }
  const GrayImage img1 = load_image_or_decode_error(a.img1);
  const GrayImage img2 = load_image_or_decode_error(a.img2);

  std::vector<Match> todo;
  std::vector<PairSeed> seeds;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < rf.records.size(); ++i) {
    const auto& r = rf.records[i];
    if (!r.kept) continue;
    PairSeed s;
    if (r.plane >= 0) {
      FilterResult one;
      one.planes = {rf.planes[static_cast<std::size_t>(r.plane)]};
      one.assignment = {0};
      s = seeds_from_filter(one, 1).front();
    }
    todo.push_back(r.match);
    seeds.push_back(s);
    where.push_back(i);
  }
  NccConfig ncfg;
  ncfg.radius = a.radius;
  ncfg.threads = threads;
  const auto refined = refine_matches(img1, img2, todo, seeds, ncfg);
  for (std::size_t k = 0; k < refined.size(); ++k) {
    auto& r = rf.records[where[k]];
    r.refined = refined[k].ok;
    r.match = refined[k].refined;
    r.ncc_score = refined[k].ok ? std::optional<double>(refined[k].score) : std::nullopt;
  }
  Json upstream = rf.config;
  rf.config = {{"command", "refine"}, {"radius", a.radius}, {"upstream", upstream}};
  write_json(a.out, result_to_json(rf));
  return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
  const auto base = read_match_source(a.base);
  const auto pred = read_match_source(a.pred);
  GroundTruth gt = gt_from_json(read_json(a.gt));
  if (a.mode == "pose") {
    if (!std::holds_alternative<PoseGroundTruth>(gt)) {
      throw ParseError("pose mode needs K1, K2, R and t in the ground truth");
    }
  } else {
    if (!std::holds_alternative<HomographyGroundTruth>(gt)) {
      throw ParseError("homography mode needs H in the ground truth");
    }
    auto& h = std::get<HomographyGroundTruth>(gt);
    if (a.width) h.width = *a.width;
    if (a.height) h.height = *a.height;
    if (h.width < 1 || h.height < 1) {
      throw ParseError("homography mode needs the image size (GT width/height or --width/--height)");
    }
  }
  const EvalReport rep =
      evaluate(base, pred, gt, a.squared ? EpipolarNorm::Squared : EpipolarNorm::Distance);
  Json doc = report_to_json(rep);
  doc["mode"] = a.mode;
  write_json(a.out, doc);
  return kExitOk;
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::string text = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    text += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  }
  write_text(path, text);
}

int cmd_synth(const SynthArgs& a) {
  Json doc = read_json(a.spec);
  if (!doc.is_object()) throw ParseError("scene spec: expected an object");
  std::string kind = "planar";
  std::optional<Eigen::Matrix3d> H;
  std::size_t count = 100;
  int radius = 10;
  if (doc.contains("kind")) {
    if (!doc.at("kind").is_string()) throw ParseError("scene spec: kind must be a string");
    kind = doc.at("kind").get<std::string>();
    doc.erase("kind");
  }
  if (doc.contains("homography")) {
    H = matrix_from_json(doc.at("homography"), "homography");
    doc.erase("homography");
  }
  if (doc.contains("count")) {
    if (!doc.at("count").is_number_unsigned()) throw ParseError("scene spec: count must be >= 0");
    count = doc.at("count").get<std::size_t>();
    doc.erase("count");
  }
  if (doc.contains("radius")) {
    if (!doc.at("radius").is_number_integer() || doc.at("radius").get<int>() < 1) {
      throw ParseError("scene spec: radius must be a positive integer");
    }
    radius = doc.at("radius").get<int>();
    doc.erase("radius");
  }
  const SceneSpec spec = spec_from_json(doc);
  if (kind != "planar" && kind != "pose" && kind != "render") {
    throw ParseError("scene spec: kind must be planar, pose or render");
  }

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  Json echo = spec_to_json(spec);
  echo["kind"] = kind;
  if (kind == "render") {
    const Eigen::Matrix3d Hr = H.value_or(Eigen::Matrix3d::Identity());
    echo["homography"] = matrix_to_json(Hr);
    echo["count"] = count;
    echo["radius"] = radius;
    const RenderedPair pair = render_textured_pair(Hr, spec, count, radius);
    save_png16(dir / "img1.png", pair.img1);
    save_png16(dir / "img2.png", pair.img2);
    write_matches_csv(dir / "matches.csv", pair.gt_matches);
    write_json(dir / "gt.json", gt_to_json(HomographyGroundTruth{Hr, spec.width, spec.height}));
  } else {
    const LabeledScene scene = kind == "pose" ? gen_pose_scene(spec) : gen_planar_scene(spec);
    write_matches_csv(dir / "matches.csv", scene.matches);
    write_labels(dir / "labels.csv", scene.labels);
    Json gt;
    if (scene.gt_pose) {
      gt = gt_to_json(*scene.gt_pose);
    } else {
      Json planes = Json::array();
      for (const auto& p : scene.gt_planes) planes.push_back(matrix_to_json(p.matrix()));
      if (!scene.gt_planes.empty()) {
        gt = gt_to_json(HomographyGroundTruth{scene.gt_planes.front().matrix(), spec.width,
                                              spec.height});
      }
      gt["planes"] = planes;
      gt["width"] = spec.width;
      gt["height"] = spec.height;
    }
    write_json(dir / "gt.json", gt);
  }
  write_json(dir / "spec.json", echo);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Piecewise-planar match filtering, NCC refinement and evaluation",
               "planefilter"};
  app.require_subcommand(1);
  int threads = -1;
  app.add_option("--threads", threads,
                 "Worker threads (default: PLANEFILTER_THREADS, 0 = all cores)")
      ->check(CLI::Range(-1, 4096));

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Discard matches outside the fitted planes");
  filter->add_option("--matches", fa.matches, "Match CSV (x1,y1,x2,y2)")->required();
  filter->add_option("--out", fa.out, "Result JSON")->required();
  filter->add_flag("--miho", fa.miho, "Use middle homographies");
  filter->add_flag("--no-fix-rotation", fa.no_fix_rotation,
                   "Skip the 90-degree rotation check (MiHo)");
  filter->add_option("--seed", fa.seed, "Random seed");
  filter->add_option("--max-iters", fa.max_iters, "RANSAC iteration ceiling");
  filter->add_option("--tl", fa.tl, "Relaxed inlier threshold in px (strict is half)");
  filter->add_option("--n-min", fa.n_min, "Minimum inliers per plane");

  RefineArgs ra;
  auto* refine = app.add_subcommand("refine", "Refine keypoints by NCC template matching");
  refine->add_option("--matches", ra.matches, "Match CSV");
  refine->add_option("--img1", ra.img1, "Image 1 (PNG or PGM)")->required();
  refine->add_option("--img2", ra.img2, "Image 2 (PNG or PGM)")->required();
  refine->add_option("--out", ra.out, "Result JSON")->required();
  refine->add_option("--from-result", ra.from_result, "Result JSON of a filter run");
  refine->add_option("--radius", ra.radius, "Patch and search radius in px");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score matches against ground truth");
  eval->add_option("--base", ea.base, "Base matches (CSV or result JSON)")->required();
  eval->add_option("--pred", ea.pred, "Predicted matches (CSV or result JSON)")->required();
  eval->add_option("--gt", ea.gt, "Ground-truth JSON")->required();
  eval->add_option("--mode", ea.mode, "pose or homography")
      ->check(CLI::IsMember({"pose", "homography"}));
  eval->add_option("--out", ea.out, "Report JSON")->required();
  eval->add_flag("--squared-epipolar", ea.squared,
                 "Divide the epipolar residual by the squared line normal");
  eval->add_option("--width", ea.width, "Image width for the homography mode");
  eval->add_option("--height", ea.height, "Image height for the homography mode");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture");
  synth->add_option("--spec", sa.spec, "Scene spec JSON")->required();
  synth->add_option("--out-dir", sa.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "planefilter: " << e.what() << "\n";
    return kExitParse;
  }

  try {
    if (*filter) return cmd_filter(fa, threads);
    if (*refine) return cmd_refine(ra, threads);
    if (*eval) return cmd_eval(ea);
    return cmd_synth(sa);
  } catch (const ParseError& e) {
    err << "planefilter: parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const IoError& e) {
    err << "planefilter: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ImageDecodeError& e) {
    err << "planefilter: image error: " << e.what() << "\n";
    return kExitImage;
  } catch (const std::exception& e) {
    err << "planefilter: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace planefilter::cli
