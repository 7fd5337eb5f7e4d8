#include "planefilter/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <Eigen/Dense>

#include "planefilter/errors.hpp"

namespace planefilter {

namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line,
                             const std::string& what) {
  throw ParseError(source + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view s, const std::string& source, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    parse_fail(source, line, "invalid number '" + std::string(s) + "'");
  }
  if (!std::isfinite(v)) parse_fail(source, line, "non-finite value");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const Json& field(const Json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(std::string(what) + ": missing field '" + key + "'");
  }
  return j.at(key);
}

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + ": expected a number");
  return j.get<double>();
}

Json vec2(const Point2& p) { return Json::array({p.x(), p.y()}); }

Point2 vec2_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ParseError(std::string(what) + ": expected [x, y]");
  return {number(j[0], what), number(j[1], what)};
}

Json match_json(const Match& m) {
  return Json::array({m.p1.x(), m.p1.y(), m.p2.x(), m.p2.y()});
}

Match match_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError(std::string(what) + ": expected [x1, y1, x2, y2]");
  }
  return {number(j[0], what), number(j[1], what), number(j[2], what), number(j[3], what)};
}

Json index_list(const std::vector<std::size_t>& v) { return Json(v); }

std::vector<std::size_t> index_list_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected an index list");
  std::vector<std::size_t> out;
  for (const auto& e : j) {
    if (!e.is_number_unsigned()) throw ParseError(std::string(what) + ": bad index");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

Homography homography_from(const Json& j, const char* what) {
  try {
    return Homography::from_normalized(matrix_from_json(j, what));
  } catch (const SingularHomography&) {
    throw ParseError(std::string(what) + ": singular homography");
  }
}

}  // namespace

// --- CSV ------------------------------------------------------------------

std::vector<Match> parse_matches_csv(std::string_view text, const std::string& source) {
  std::vector<Match> out;
  std::size_t line_no = 0;
  bool header = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") {
      line.remove_prefix(3);  // UTF-8 BOM
    }
    if (!header) {
      if (line != kMatchHeader) parse_fail(source, line_no, "expected header 'x1,y1,x2,y2'");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    double v[4];
    std::size_t k = 0;
    while (true) {
      const std::size_t comma = line.find(',');
      if (k == 4) parse_fail(source, line_no, "too many fields");
      v[k++] = parse_double(line.substr(0, comma), source, line_no);
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (k != 4) parse_fail(source, line_no, "expected 4 fields");
    out.emplace_back(v[0], v[1], v[2], v[3]);
  }
  if (!header) parse_fail(source, 1, "missing header");
  return out;
}

std::string format_matches_csv(std::span<const Match> matches) {
  std::string out(kMatchHeader);
  out += '\n';
  for (const auto& m : matches) {
    out += format_double(m.p1.x()) + ',' + format_double(m.p1.y()) + ',' +
           format_double(m.p2.x()) + ',' + format_double(m.p2.y()) + '\n';
  }
  return out;
}

std::vector<Match> read_matches_csv(const std::filesystem::path& path) {
  return parse_matches_csv(read_text(path), path.string());
}

void write_matches_csv(const std::filesystem::path& path, std::span<const Match> matches) {
  write_text(path, format_matches_csv(matches));
}

// --- result file --------------------------------------------------------

std::vector<Match> ResultFile::kept_matches() const {
  std::vector<Match> out;
  for (const auto& r : records) {
    if (r.kept) out.push_back(r.match);
  }
  return out;
}

std::vector<Match> ResultFile::all_matches() const {
  std::vector<Match> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.match);
  return out;
}

Json matrix_to_json(const Eigen::Matrix3d& m) {
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(Json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

Eigen::Matrix3d matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + ": expected 3x3 matrix");
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_array() || j[i].size() != 3) {
      throw ParseError(std::string(what) + ": expected 3x3 matrix");
    }
    for (int k = 0; k < 3; ++k) m(i, k) = number(j[i][k], what);
  }
  return m;
}

Json result_to_json(const ResultFile& result) {
  Json doc;
  doc["config"] = result.config;
  doc["alpha_star"] = result.alpha_star;
  Json planes = Json::array();
  for (const auto& p : result.planes) {
    Json jp;
    jp["H"] = matrix_to_json(p.H.matrix());
    jp["anchor"] = match_json(p.anchor);
    jp["inliers_weak"] = index_list(p.inliers_weak);
    jp["inliers_strong"] = index_list(p.inliers_strong);
    if (p.miho) {
      Json jm;
      jm["H1"] = matrix_to_json(p.miho->H1.matrix());
      jm["H2"] = matrix_to_json(p.miho->H2.matrix());
      jm["quarter_turns"] = p.miho->quarter_turns;
      jm["center"] = vec2(p.miho->center);
      jp["miho"] = jm;
    }
    planes.push_back(jp);
  }
  doc["planes"] = planes;
  Json records = Json::array();
  for (const auto& r : result.records) {
    Json jr;
    jr["index"] = r.index;
    jr["kept"] = r.kept;
    jr["plane"] = r.plane;
    jr["x1"] = r.match.p1.x();
    jr["y1"] = r.match.p1.y();
    jr["x2"] = r.match.p2.x();
    jr["y2"] = r.match.p2.y();
    jr["ncc_score"] = r.ncc_score ? Json(*r.ncc_score) : Json(nullptr);
    jr["refined"] = r.refined;
    records.push_back(jr);
  }
  doc["matches"] = records;
  return doc;
}

ResultFile result_from_json(const Json& doc) {
  constexpr const char* what = "result file";
  ResultFile out;
  if (!doc.is_object()) throw ParseError("result file: expected an object");
  out.config = field(doc, "config", what);
  out.alpha_star = number(field(doc, "alpha_star", what), "alpha_star");
  const Json& planes = field(doc, "planes", what);
  if (!planes.is_array()) throw ParseError("result file: planes must be a list");
  for (const auto& jp : planes) {
    HomographyModel p;
    p.H = homography_from(field(jp, "H", "plane"), "plane H");
    p.anchor = match_from(field(jp, "anchor", "plane"), "plane anchor");
    p.inliers_weak = index_list_from(field(jp, "inliers_weak", "plane"), "inliers_weak");
    p.inliers_strong = index_list_from(field(jp, "inliers_strong", "plane"), "inliers_strong");
    if (jp.contains("miho")) {
      const Json& jm = jp.at("miho");
      MihoPair pair{homography_from(field(jm, "H1", "miho"), "miho H1"),
                    homography_from(field(jm, "H2", "miho"), "miho H2")};
      const Json& q = field(jm, "quarter_turns", "miho");
      if (!q.is_number_integer()) throw ParseError("miho: quarter_turns must be an integer");
      pair.quarter_turns = q.get<int>();
      pair.center = vec2_from(field(jm, "center", "miho"), "miho center");
      p.miho = pair;
    }
    out.planes.push_back(std::move(p));
  }
  const Json& records = field(doc, "matches", what);
  if (!records.is_array()) throw ParseError("result file: matches must be a list");
  for (const auto& jr : records) {
    MatchRecord r;
    const Json& idx = field(jr, "index", "match record");
    if (!idx.is_number_unsigned()) throw ParseError("match record: bad index");
    r.index = idx.get<std::size_t>();
    const Json& kept = field(jr, "kept", "match record");
    if (!kept.is_boolean()) throw ParseError("match record: kept must be a boolean");
    r.kept = kept.get<bool>();
    const Json& plane = field(jr, "plane", "match record");
    if (!plane.is_number_integer()) throw ParseError("match record: plane must be an integer");
    r.plane = plane.get<int>();
    if (r.plane >= static_cast<int>(out.planes.size()) || r.plane < -1) {
      throw ParseError("match record: plane index out of range");
    }
    r.match = Match(number(field(jr, "x1", "match record"), "x1"),
                    number(field(jr, "y1", "match record"), "y1"),
                    number(field(jr, "x2", "match record"), "x2"),
                    number(field(jr, "y2", "match record"), "y2"));
    const Json& score = field(jr, "ncc_score", "match record");
    if (!score.is_null()) r.ncc_score = number(score, "ncc_score");
    if (jr.contains("refined")) {
      if (!jr.at("refined").is_boolean()) throw ParseError("match record: refined must be a boolean");
      r.refined = jr.at("refined").get<bool>();
    }
    out.records.push_back(r);
  }
  return out;
}

// --- ground truth -----------------------------------------------------------

Json gt_to_json(const GroundTruth& gt) {
  Json doc;
  if (const auto* p = std::get_if<PoseGroundTruth>(&gt)) {
    doc["K1"] = matrix_to_json(p->K1);
    doc["K2"] = matrix_to_json(p->K2);
    doc["R"] = matrix_to_json(p->R);
    doc["t"] = Json::array({p->t.x(), p->t.y(), p->t.z()});
    if (p->scale) doc["scale"] = *p->scale;
  } else {
    const auto& h = std::get<HomographyGroundTruth>(gt);
    doc["H"] = matrix_to_json(h.H);
    if (h.width > 0) doc["width"] = h.width;
    if (h.height > 0) doc["height"] = h.height;
  }
  return doc;
}

GroundTruth gt_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("ground truth: expected an object");
  if (doc.contains("H")) {
    HomographyGroundTruth h;
    h.H = matrix_from_json(doc.at("H"), "H");
    if (!(std::abs(normalize_homography_matrix(h.H).determinant()) > 1e-15)) {
      throw ParseError("ground truth: singular H");
    }
    for (const char* k : {"width", "height"}) {
      if (!doc.contains(k)) continue;
      if (!doc.at(k).is_number_integer() || doc.at(k).get<long>() < 1) {
        throw ParseError(std::string("ground truth: ") + k + " must be a positive integer");
      }
    }
    h.width = doc.value("width", 0);
    h.height = doc.value("height", 0);
    return h;
  }
  PoseGroundTruth p;
  p.K1 = matrix_from_json(field(doc, "K1", "ground truth"), "K1");
  p.K2 = matrix_from_json(field(doc, "K2", "ground truth"), "K2");
  p.R = matrix_from_json(field(doc, "R", "ground truth"), "R");
  const Json& t = field(doc, "t", "ground truth");
  if (!t.is_array() || t.size() != 3) throw ParseError("ground truth: t must have 3 entries");
  p.t = Eigen::Vector3d(number(t[0], "t"), number(t[1], "t"), number(t[2], "t"));
  if (doc.contains("scale")) p.scale = number(doc.at("scale"), "scale");
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("ground truth: ") + e.what());
  }
  return p;
}

// --- scene spec ----------------------------------------------------------------

Json spec_to_json(const SceneSpec& s) {
  Json j;
  j["planes"] = s.planes;
  j["matches_per_plane"] = s.matches_per_plane;
  j["noise_sigma"] = s.noise_sigma;
  j["outlier_fraction"] = s.outlier_fraction;
  j["width"] = s.width;
  j["height"] = s.height;
  j["max_shift"] = s.max_shift;
  j["corner_jitter"] = s.corner_jitter;
  j["depth_min"] = s.depth_min;
  j["depth_max"] = s.depth_max;
  j["baseline"] = s.baseline;
  j["max_rotation_deg"] = s.max_rotation_deg;
  j["pose_scale"] = s.pose_scale;
  j["texture"] = s.texture == TextureKind::Checkerboard ? "checkerboard" : "white_noise";
  j["checker_size"] = s.checker_size;
  j["seed"] = s.seed;
  return j;
}

SceneSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("scene spec: expected an object");
  SceneSpec s;
  auto integer = [&](const char* k, auto& dst) {
    if (!j.contains(k)) return;
    if (!j.at(k).is_number_integer()) throw ParseError(std::string("scene spec: ") + k + " must be an integer");
    dst = j.at(k).get<std::remove_reference_t<decltype(dst)>>();
  };
  auto real = [&](const char* k, double& dst) {
    if (j.contains(k)) dst = number(j.at(k), k);
  };
  static const char* kKnown[] = {"planes", "matches_per_plane", "noise_sigma",
                                 "outlier_fraction", "width", "height", "max_shift",
                                 "corner_jitter", "depth_min", "depth_max", "baseline",
                                 "max_rotation_deg", "pose_scale", "texture",
                                 "checker_size", "seed"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), k) == std::end(kKnown)) {
      throw ParseError("scene spec: unknown key '" + k + "'");
    }
  }
  integer("planes", s.planes);
  integer("matches_per_plane", s.matches_per_plane);
  real("noise_sigma", s.noise_sigma);
  real("outlier_fraction", s.outlier_fraction);
  integer("width", s.width);
  integer("height", s.height);
  real("max_shift", s.max_shift);
  real("corner_jitter", s.corner_jitter);
  real("depth_min", s.depth_min);
  real("depth_max", s.depth_max);
  real("baseline", s.baseline);
  real("max_rotation_deg", s.max_rotation_deg);
  real("pose_scale", s.pose_scale);
  integer("checker_size", s.checker_size);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ParseError("scene spec: seed must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("texture")) {
    const Json& t = j.at("texture");
    if (t == "checkerboard") {
      s.texture = TextureKind::Checkerboard;
    } else if (t == "white_noise") {
      s.texture = TextureKind::WhiteNoise;
    } else {
      throw ParseError("scene spec: texture must be 'white_noise' or 'checkerboard'");
    }
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("scene spec: ") + e.what());
  }
  return s;
}

// --- report ---------------------------------------------------------------

namespace {

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json auc_json(const AucResult& a) {
  Json j;
  j["thresholds"] = a.thresholds;
  j["values"] = a.values;
  j["mean"] = a.mean;
  return j;
}

}  // namespace

Json report_to_json(const EvalReport& r) {
  Json j;
  j["base_count"] = r.base_count;
  j["count"] = r.count;
  j["recall"] = r.scores.recall;
  j["precision"] = r.scores.precision;
  j["filtered"] = r.scores.filtered;
  if (r.pose_error_angular) j["pose_error_angular"] = finite_or_null(*r.pose_error_angular);
  if (r.pose_error_metric) j["pose_error_metric"] = finite_or_null(*r.pose_error_metric);
  if (r.homography_error) j["homography_error"] = finite_or_null(*r.homography_error);
  if (r.auc_F_angular) j["auc_F_angular"] = auc_json(*r.auc_F_angular);
  if (r.auc_F_metric) j["auc_F_metric"] = auc_json(*r.auc_F_metric);
  if (r.auc_H) j["auc_H"] = auc_json(*r.auc_H);
  return j;
}

// --- files -------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  return text;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("cannot write " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const Json& doc) {
  write_text(path, dump_json(doc));
}

bool looks_like_json(std::string_view text) {
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
    return c == '{';
  }
  return false;
}

std::vector<Match> read_match_source(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  if (!looks_like_json(text)) return parse_matches_csv(text, path.string());
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return result_from_json(doc).kept_matches();
}

}  // namespace planefilter
