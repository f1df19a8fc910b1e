#pragma once

// Bytes to domain types: the JSON dataset layout, scanpath files, reject logs
// and FGRID float maps.
//
// Dataset layout (all coordinates are x = column, y = row):
//   dataset.json  {name, image_height, image_width, fovea_size, max_fixations,
//                  cell_size, color}
//   trials.json   [{trial_id, image, target_template|null,
//                   target_bbox:{x,y,w,h}, target_category,
//                   initial_fixation:{x,y},
//                   scanpaths:[{source_id, fixations:[[x,y],...],
//                               target_found, max_fixations}]}]
//
// FGRID v1: ASCII line "FGRID v1 <rows> <cols>\n" followed by rows*cols
// little-endian binary32 values, row-major, y down.

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vsearch/core.hpp"
#include "vsearch/image.hpp"
#include "vsearch/preprocess.hpp"

namespace vsearch {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// FGRID

inline std::string encode_fgrid(const Grid<double>& g) {
  std::string out = "FGRID v1 " + std::to_string(g.rows()) + " " + std::to_string(g.cols()) + "\n";
  out.reserve(out.size() + g.size() * 4);
  for (double v : g) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFFu));
  }
  return out;
}

inline Grid<double> decode_fgrid(const std::string& bytes, const std::string& name = "<memory>") {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos || nl > 64) throw Error(name + ": bad FGRID header at byte 0");
  std::istringstream header(bytes.substr(0, nl));
  std::string magic, version;
  long rows = 0, cols = 0;
  header >> magic >> version >> rows >> cols;
  if (magic != "FGRID" || version != "v1") throw Error(name + ": bad FGRID magic at byte 0");
  if (!header || rows <= 0 || cols <= 0) throw Error(name + ": bad FGRID dimensions at byte 9");
  const std::size_t offset = nl + 1;
  const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (bytes.size() - offset < n * 4)
    throw Error(name + ": truncated FGRID payload at byte " + std::to_string(bytes.size()) + " (expected " +
                std::to_string(offset + n * 4) + ")");
  if (bytes.size() - offset > n * 4)
    throw Error(name + ": trailing bytes after FGRID payload at byte " + std::to_string(offset + n * 4));
  Grid<double> g(static_cast<int>(rows), static_cast<int>(cols));
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + k])) << (8 * k);
    const float v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) throw Error(name + ": non-finite FGRID value at byte " + std::to_string(offset + 4 * i));
    g[i] = v;
  }
  return g;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

inline Grid<double> read_fgrid(const fs::path& path) { return decode_fgrid(read_text(path), path.string()); }

inline void save_map(const Grid<double>& g, const fs::path& path) { write_text(path, encode_fgrid(g)); }

/// Loads a map and brings it to the requested dimensions. Resampled maps are
/// shifted (not clipped) so their minimum is at least zero.
inline ProbabilityGrid load_map(const fs::path& path, int expected_rows, int expected_cols) {
  Grid<double> g = read_fgrid(path);
  if (g.rows() == expected_rows && g.cols() == expected_cols) return g;
  g = resample_bilinear(g, expected_rows, expected_cols);
  const double lo = *std::min_element(g.begin(), g.end());
  if (lo < 0)
    for (double& v : g) v -= lo;
  return g;
}

// ---------------------------------------------------------------------------
// JSON conversions

inline json to_json(const DatasetSpec& s) {
  return {{"name", s.name},           {"image_height", s.image_height}, {"image_width", s.image_width},
          {"fovea_size", s.fovea_size}, {"max_fixations", s.max_fixations}, {"cell_size", s.cell_size},
          {"color", s.color}};
}

inline DatasetSpec dataset_spec_from_json(const json& j) {
  DatasetSpec s;
  s.name = j.at("name").get<std::string>();
  s.image_height = j.at("image_height").get<int>();
  s.image_width = j.at("image_width").get<int>();
  s.fovea_size = j.at("fovea_size").get<int>();
  s.max_fixations = j.at("max_fixations").get<int>();
  s.cell_size = j.at("cell_size").get<int>();
  s.color = j.at("color").get<bool>();
  if (s.image_height <= 0 || s.image_width <= 0 || s.fovea_size <= 0 || s.max_fixations <= 0 || s.cell_size <= 0)
    throw Error("dataset.json: dimensions, fovea_size, max_fixations and cell_size must be positive");
  return s;
}

inline json to_json(const Scanpath& s) {
  json fix = json::array();
  for (const auto& f : s.fixations) fix.push_back({f.x, f.y});
  return {{"source_id", s.source_id},
          {"fixations", std::move(fix)},
          {"target_found", s.target_found},
          {"max_fixations", s.max_fixations}};
}

inline Scanpath scanpath_from_json(const json& j) {
  Scanpath s;
  s.source_id = j.at("source_id").get<std::string>();
  for (const auto& f : j.at("fixations")) {
    if (!f.is_array() || f.size() != 2) throw Error("fixation must be an [x, y] pair");
    s.fixations.push_back({f[0].get<double>(), f[1].get<double>()});
  }
  s.target_found = j.at("target_found").get<bool>();
  s.max_fixations = j.at("max_fixations").get<int>();
  return s;
}

inline json to_json(const Trial& t) {
  json paths = json::array();
  for (const auto& s : t.human_scanpaths) paths.push_back(to_json(s));
  return {{"trial_id", t.trial_id},
          {"image", t.image_ref},
          {"target_template", t.has_template() ? json(t.target_template_ref) : json(nullptr)},
          {"target_bbox", {{"x", t.target_bbox.x}, {"y", t.target_bbox.y}, {"w", t.target_bbox.w}, {"h", t.target_bbox.h}}},
          {"target_category", t.target_category},
          {"initial_fixation", {{"x", t.initial_fixation.x}, {"y", t.initial_fixation.y}}},
          {"scanpaths", std::move(paths)}};
}

inline Trial trial_from_json(const json& j) {
  Trial t;
  t.trial_id = j.at("trial_id").get<std::string>();
  t.image_ref = j.at("image").get<std::string>();
  const auto& tmpl = j.at("target_template");
  if (!tmpl.is_null()) t.target_template_ref = tmpl.get<std::string>();
  const auto& b = j.at("target_bbox");
  t.target_bbox = {b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()};
  t.target_category = j.at("target_category").get<std::string>();
  const auto& f = j.at("initial_fixation");
  t.initial_fixation = {f.at("x").get<double>(), f.at("y").get<double>()};
  for (const auto& s : j.at("scanpaths")) t.human_scanpaths.push_back(scanpath_from_json(s));
  return t;
}

inline json to_json(const RejectEntry& r) {
  json j = {{"trial_id", r.trial_id}};
  if (r.source_id) j["source_id"] = *r.source_id;
  j["reason"] = r.reason;
  return j;
}

inline std::string reject_log_jsonl(const RejectLog& log) {
  std::string out;
  for (const auto& r : log) out += to_json(r).dump() + "\n";
  return out;
}

inline RejectLog parse_reject_log(const std::string& text) {
  RejectLog log;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    RejectEntry e{j.at("trial_id").get<std::string>(), std::nullopt, j.at("reason").get<std::string>()};
    if (j.contains("source_id")) e.source_id = j.at("source_id").get<std::string>();
    log.push_back(std::move(e));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Dataset

struct LoadedDataset {
  fs::path root;
  DatasetSpec spec;
  std::vector<Trial> trials;
  RejectLog rejects;

  fs::path resolve(const std::string& ref) const {
    const fs::path p(ref);
    return p.is_absolute() ? p : root / p;
  }
};

namespace detail {

inline bool finite(const Fixation& f) { return std::isfinite(f.x) && std::isfinite(f.y); }

inline std::optional<std::string> scanpath_problem(const Scanpath& s) {
  if (s.fixations.empty()) return "empty scanpath";
  if (s.max_fixations <= 0) return "max_fixations must be positive";
  for (const auto& f : s.fixations)
    if (!finite(f)) return "non-finite fixation";
  if (s.saccade_count() > s.max_fixations) return "scanpath exceeds its saccade budget";
  return std::nullopt;
}

}  // namespace detail

/// Validates one trial. Trial-level problems are returned as the reason;
/// invalid scanpaths are removed from the trial and logged individually.
inline std::optional<std::string> validate_trial(Trial& t, const DatasetSpec& spec, RejectLog& log) {
  if (!inside_image(t.target_bbox, spec)) return "bbox out of bounds";
  if (!detail::finite(t.initial_fixation) || !inside_image(t.initial_fixation, spec))
    return "initial fixation out of bounds";
  if (is_found(t.initial_fixation, t.target_bbox, FoundPredicate::grid(spec))) return "trivial trial";
  std::vector<Scanpath> ok;
  for (auto& s : t.human_scanpaths) {
    if (auto problem = detail::scanpath_problem(s))
      log.push_back({t.trial_id, s.source_id, *problem});
    else
      ok.push_back(std::move(s));
  }
  t.human_scanpaths = std::move(ok);
  return std::nullopt;
}

/// Reads `dataset.json` and `trials.json` under `root`. Missing or unreadable
/// files throw; bad records land in `rejects` with a diagnostic.
inline LoadedDataset load_dataset(const fs::path& root) {
  LoadedDataset ds;
  ds.root = root;
  const auto spec_path = root / "dataset.json";
  const auto trials_path = root / "trials.json";
  if (!fs::exists(spec_path)) throw Error("missing " + spec_path.string());
  if (!fs::exists(trials_path)) throw Error("missing " + trials_path.string());
  try {
    ds.spec = dataset_spec_from_json(json::parse(read_text(spec_path)));
  } catch (const json::exception& e) {
    throw Error(spec_path.string() + ": " + e.what());
  }
  json arr;
  try {
    arr = json::parse(read_text(trials_path));
  } catch (const json::exception& e) {
    throw Error(trials_path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw Error(trials_path.string() + ": expected a JSON array");

  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& rec = arr[i];
    std::string id = "#" + std::to_string(i);
    if (rec.is_object() && rec.contains("trial_id") && rec["trial_id"].is_string()) id = rec["trial_id"].get<std::string>();
    Trial t;
    try {
      t = trial_from_json(rec);
    } catch (const std::exception& e) {
      ds.rejects.push_back({id, std::nullopt, std::string("malformed record: ") + e.what()});
      continue;
    }
    if (!seen.insert(t.trial_id).second) {
      ds.rejects.push_back({t.trial_id, std::nullopt, "duplicate trial_id"});
      continue;
    }
    if (auto problem = validate_trial(t, ds.spec, ds.rejects)) {
      ds.rejects.push_back({t.trial_id, std::nullopt, *problem});
      continue;
    }
    ds.trials.push_back(std::move(t));
  }
  return ds;
}

inline void save_dataset(const DatasetSpec& spec, const std::vector<Trial>& trials, const fs::path& root) {
  fs::create_directories(root);
  write_text(root / "dataset.json", to_json(spec).dump(2) + "\n");
  json arr = json::array();
  for (const auto& t : trials) arr.push_back(to_json(t));
  write_text(root / "trials.json", arr.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Scanpath files

struct TrialScanpath {
  std::string trial_id;
  Scanpath scanpath;

  friend bool operator==(const TrialScanpath&, const TrialScanpath&) = default;
};

inline std::string encode_scanpaths(const std::vector<TrialScanpath>& paths) {
  json arr = json::array();
  for (const auto& p : paths) {
    json j = {{"trial_id", p.trial_id}};
    j.update(to_json(p.scanpath));
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

inline void save_scanpaths(const std::vector<TrialScanpath>& paths, const fs::path& out) {
  write_text(out, encode_scanpaths(paths));
}

inline std::vector<TrialScanpath> parse_scanpaths(const std::string& text, const std::string& name = "<memory>") {
  std::vector<TrialScanpath> out;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw Error(name + ": expected a JSON array");
    for (const auto& j : arr) out.push_back({j.at("trial_id").get<std::string>(), scanpath_from_json(j)});
  } catch (const json::exception& e) {
    throw Error(name + ": " + e.what());
  }
  return out;
}

inline std::vector<TrialScanpath> load_scanpaths(const fs::path& path) {
  return parse_scanpaths(read_text(path), path.string());
}

}  // namespace vsearch
