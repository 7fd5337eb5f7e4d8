#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "planefilter/eval.hpp"
#include "planefilter/geometry.hpp"
#include "planefilter/synth.hpp"

namespace planefilter {

using Json = nlohmann::json;

// --- match CSV -------------------------------------------------------------

inline constexpr std::string_view kMatchHeader = "x1,y1,x2,y2";

/// Throws ParseError with a line number on malformed content.
std::vector<Match> parse_matches_csv(std::string_view text,
                                     const std::string& source = "<memory>");
std::string format_matches_csv(std::span<const Match> matches);
std::vector<Match> read_matches_csv(const std::filesystem::path& path);
void write_matches_csv(const std::filesystem::path& path,
                       std::span<const Match> matches);

// --- result file -----------------------------------------------------------

struct MatchRecord {
  std::size_t index = 0;
  bool kept = true;
  int plane = -1;  // -1: no plane
  Match match;     // refined coordinates when refined
  std::optional<double> ncc_score;
  bool refined = false;
};

struct ResultFile {
  Json config = Json::object();
  double alpha_star = 0.0;
  std::vector<HomographyModel> planes;
  std::vector<MatchRecord> records;

  std::vector<Match> kept_matches() const;
  std::vector<Match> all_matches() const;
};

Json result_to_json(const ResultFile& result);
/// Throws ParseError on missing fields or wrong shapes.
ResultFile result_from_json(const Json& doc);

// --- ground truth, scene spec, report ----------------------------------

Json gt_to_json(const GroundTruth& gt);
GroundTruth gt_from_json(const Json& doc);

Json spec_to_json(const SceneSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
SceneSpec spec_from_json(const Json& doc);

Json report_to_json(const EvalReport& report);

Json matrix_to_json(const Eigen::Matrix3d& m);
Eigen::Matrix3d matrix_from_json(const Json& j, const char* what);

// --- files -------------------------------------------------------------

/// Throws IoError when unreadable and ParseError on invalid JSON.
Json read_json(const std::filesystem::path& path);
/// Sorted keys, two-space indent, trailing newline.
void write_json(const std::filesystem::path& path, const Json& doc);
std::string dump_json(const Json& doc);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// True when the file content starts like a JSON document.
bool looks_like_json(std::string_view text);

/// Matches from either a CSV file or a result file (kept records only).
std::vector<Match> read_match_source(const std::filesystem::path& path);

}  // namespace planefilter
