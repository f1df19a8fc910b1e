#pragma once

// Dataset equalization: one target-found criterion for every scanpath source,
// truncation at the first fixation on target, and removal of unusable trials.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vsearch/core.hpp"

namespace vsearch {

enum class FoundMode { grid_cell, pixel_window };

struct FoundPredicate {
  FoundMode mode = FoundMode::grid_cell;
  double window_w = 0.0;  // pixel_window only
  double window_h = 0.0;
  DatasetSpec spec;

  static FoundPredicate grid(const DatasetSpec& spec) { return {FoundMode::grid_cell, 0, 0, spec}; }
  static FoundPredicate window(const DatasetSpec& spec, double w, double h) {
    if (w <= 0 || h <= 0) throw Error("pixel window dimensions must be positive");
    return {FoundMode::pixel_window, w, h, spec};
  }
};

inline bool is_found(const Fixation& f, const BoundingBox& b, const FoundPredicate& p) {
  if (p.mode == FoundMode::grid_cell) return bbox_grid_cells(b, p.spec).contains(grid_cell_of(f, p.spec));
  const double hw = p.window_w / 2.0;
  const double hh = p.window_h / 2.0;
  return f.x >= b.x - hw && f.x <= b.x + b.w + hw && f.y >= b.y - hh && f.y <= b.y + b.h + hh;
}

/// Cuts the scanpath right after its first fixation on target.
inline Scanpath truncate_at_target(const Scanpath& s, const BoundingBox& b, const FoundPredicate& p) {
  if (s.fixations.empty()) throw Error("empty scanpath");
  Scanpath out = s;
  for (std::size_t i = 0; i < s.fixations.size(); ++i) {
    if (is_found(s.fixations[i], b, p)) {
      out.fixations.resize(i + 1);
      out.target_found = true;
      return out;
    }
  }
  out.target_found = false;
  return out;
}

struct RejectEntry {
  std::string trial_id;
  std::optional<std::string> source_id;
  std::string reason;

  friend bool operator==(const RejectEntry&, const RejectEntry&) = default;
};

using RejectLog = std::vector<RejectEntry>;

namespace reason {
inline constexpr const char* trivial = "trivial";
inline constexpr const char* not_found = "target not found";
inline constexpr const char* no_successful = "no successful scanpaths";
}  // namespace reason

struct EqualizeResult {
  std::vector<Trial> trials;
  RejectLog rejects;

  std::size_t scanpaths_kept() const {
    std::size_t n = 0;
    for (const auto& t : trials) n += t.human_scanpaths.size();
    return n;
  }
  std::size_t scanpaths_dropped() const {
    std::size_t n = 0;
    for (const auto& r : rejects) n += r.source_id.has_value();
    return n;
  }
  std::size_t trials_dropped() const { return rejects.size() - scanpaths_dropped(); }
};

/// Applies the common criterion to every human scanpath. Each input scanpath
/// ends up either in the output or as a RejectLog entry carrying its
/// source_id; each dropped trial adds one entry without a source_id.
inline EqualizeResult equalize(const std::vector<Trial>& trials, const DatasetSpec& spec) {
  const auto pred = FoundPredicate::grid(spec);
  EqualizeResult res;
  for (const Trial& trial : trials) {
    if (is_found(trial.initial_fixation, trial.target_bbox, pred)) {
      for (const auto& s : trial.human_scanpaths)
        res.rejects.push_back({trial.trial_id, s.source_id, reason::trivial});
      res.rejects.push_back({trial.trial_id, std::nullopt, reason::trivial});
      continue;
    }
    Trial kept = trial;
    kept.human_scanpaths.clear();
    for (const auto& s : trial.human_scanpaths) {
      if (s.fixations.empty()) {
        res.rejects.push_back({trial.trial_id, s.source_id, "empty scanpath"});
        continue;
      }
      Scanpath clamped = s;
      for (auto& f : clamped.fixations) f = clamp_to_image(f, spec.image_height, spec.image_width);
      Scanpath cut = truncate_at_target(clamped, trial.target_bbox, pred);
      if (cut.target_found)
        kept.human_scanpaths.push_back(std::move(cut));
      else
        res.rejects.push_back({trial.trial_id, s.source_id, reason::not_found});
    }
    if (kept.human_scanpaths.empty()) {
      res.rejects.push_back({trial.trial_id, std::nullopt, reason::no_successful});
      continue;
    }
    res.trials.push_back(std::move(kept));
  }
  return res;
}

struct Dims {
  int height = 0;
  int width = 0;
};

inline Scanpath rescale_scanpath(const Scanpath& s, Dims from, Dims to) {
  if (from.height <= 0 || from.width <= 0 || to.height <= 0 || to.width <= 0)
    throw Error("rescale dimensions must be positive");
  Scanpath out = s;
  const double sx = static_cast<double>(to.width) / from.width;
  const double sy = static_cast<double>(to.height) / from.height;
  for (auto& f : out.fixations) f = clamp_to_image({f.x * sx, f.y * sy}, to.height, to.width);
  return out;
}

/// Mean target box size over a set of trials, as (w, h) in pixels.
inline std::pair<double, double> mean_target_size(const std::vector<Trial>& trials) {
  if (trials.empty()) throw Error("mean target size of an empty trial set");
  double w = 0.0;
  double h = 0.0;
  for (const auto& t : trials) {
    w += t.target_bbox.w;
    h += t.target_bbox.h;
  }
  return {w / trials.size(), h / trials.size()};
}

/// Default saccade budgets for the four benchmark datasets. Interiors is
/// fixed by the experiment; the others are operator-overridable defaults.
inline std::optional<int> default_max_fixations(const std::string& dataset) {
  if (dataset == "Interiors") return 12;
  if (dataset == "Unrestricted") return 16;
  if (dataset == "MCS") return 10;
  if (dataset == "COCOSearch18") return 10;
  return std::nullopt;
}

/// Saccade budget at which human performance saturates: the smallest n whose
/// cumulative found fraction reaches 95% of the plateau reached by the
/// longest truncated human scanpath.
inline int saturation_max_fixations(const std::vector<Trial>& trials, const DatasetSpec& spec,
                                    double fraction = 0.95) {
  const auto pred = FoundPredicate::grid(spec);
  std::vector<int> found_at;
  std::size_t total = 0;
  for (const auto& t : trials) {
    for (const auto& s : t.human_scanpaths) {
      if (s.fixations.empty()) continue;
      ++total;
      const Scanpath cut = truncate_at_target(s, t.target_bbox, pred);
      if (cut.target_found) found_at.push_back(cut.saccade_count());
    }
  }
  if (found_at.empty()) throw Error("no successful human scanpaths to estimate a saccade budget");
  const int longest = std::max(1, *std::max_element(found_at.begin(), found_at.end()));
  auto found_within = [&](int n) {
    return static_cast<double>(std::count_if(found_at.begin(), found_at.end(), [n](int k) { return k <= n; })) /
           static_cast<double>(total);
  };
  const double plateau = found_within(longest);
  for (int n = 1; n <= longest; ++n)
    if (found_within(n) >= fraction * plateau) return n;
  return longest;
}

}  // namespace vsearch
