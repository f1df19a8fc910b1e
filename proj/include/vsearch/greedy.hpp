#pragma once

// Greedy attention-map searcher (IVSN style): jump to the global maximum of
// the attention map, zero a patch around every visited fixation, repeat. No
// evidence is accumulated across saccades.

#include <cmath>
#include <string>
#include <utility>

#include "vsearch/core.hpp"
#include "vsearch/preprocess.hpp"
#include "vsearch/similarity.hpp"

namespace vsearch {

enum class PatchMode { fovea, target_size, double_target_size };

inline PatchMode patch_mode_from_string(const std::string& s) {
  if (s == "fovea") return PatchMode::fovea;
  if (s == "target_size") return PatchMode::target_size;
  if (s == "double_target_size") return PatchMode::double_target_size;
  throw Error("unknown patch_mode '" + s + "'");
}

struct GreedyConfig {
  SimilaritySource attention{SimilarityKind::external_map, {}};
  PatchMode patch_mode = PatchMode::double_target_size;
  int max_fixations = 0;  // 0: use the dataset's budget
};

struct PatchSize {
  int w = 0;
  int h = 0;

  friend bool operator==(const PatchSize&, const PatchSize&) = default;
};

/// `mean_target` is the dataset's mean target box size (w, h).
inline PatchSize resolve_patch(const DatasetSpec& spec, std::pair<double, double> mean_target, const GreedyConfig& cfg) {
  PatchSize p;
  switch (cfg.patch_mode) {
    case PatchMode::fovea: p = {spec.fovea_size, spec.fovea_size}; break;
    case PatchMode::target_size:
      p = {static_cast<int>(std::lround(mean_target.first)), static_cast<int>(std::lround(mean_target.second))};
      break;
    case PatchMode::double_target_size:
      p = {static_cast<int>(std::lround(2 * mean_target.first)), static_cast<int>(std::lround(2 * mean_target.second))};
      break;
  }
  if (p.w <= 0 || p.h <= 0) throw Error("inhibition-of-return patch must have positive size");
  return p;
}

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(const Fixation& f) const {
    const int x = static_cast<int>(std::floor(f.x)), y = static_cast<int>(std::floor(f.y));
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
};

/// Patch of `size` centered on `f`, clipped to a rows x cols map.
inline PixelRect patch_around(const Fixation& f, PatchSize size, int rows, int cols) {
  const int cx = static_cast<int>(std::floor(f.x)), cy = static_cast<int>(std::floor(f.y));
  const int x0 = cx - size.w / 2, y0 = cy - size.h / 2;
  return {std::max(0, x0), std::max(0, y0), std::min(cols, x0 + size.w), std::min(rows, y0 + size.h)};
}

struct GreedyResult {
  Scanpath scanpath;
  std::vector<double> values;     // attention value at each chosen fixation
  std::vector<PixelRect> zeroed;  // inhibition patches, in order
  bool exhausted = false;
};

/// Greedy search on an attention map at image resolution. The found check
/// comes before the inhibition step at every fixation.
inline GreedyResult greedy_search(Grid<double> attention, const Trial& trial, const FoundPredicate& found,
                                  PatchSize patch, int max_fixations, const std::string& source_id = "greedy") {
  GreedyResult res;
  res.scanpath.source_id = source_id;
  res.scanpath.max_fixations = max_fixations;
  res.scanpath.fixations.push_back(trial.initial_fixation);
  for (;;) {
    const Fixation current = res.scanpath.fixations.back();
    if (is_found(current, trial.target_bbox, found)) {
      res.scanpath.target_found = true;
      break;
    }
    if (res.scanpath.saccade_count() >= max_fixations) break;
    const PixelRect rect = patch_around(current, patch, attention.rows(), attention.cols());
    for (int y = rect.y0; y < rect.y1; ++y)
      for (int x = rect.x0; x < rect.x1; ++x) attention(y, x) = 0.0;
    res.zeroed.push_back(rect);

    std::size_t best = 0;
    for (std::size_t i = 1; i < attention.size(); ++i)
      if (attention[i] > attention[best]) best = i;
    if (!(attention[best] > 0.0)) {
      res.exhausted = true;
      break;
    }
    res.values.push_back(attention[best]);
    const int r = static_cast<int>(best / attention.cols()), c = static_cast<int>(best % attention.cols());
    res.scanpath.fixations.push_back({static_cast<double>(c), static_cast<double>(r)});
  }
  return res;
}

/// Runs the greedy searcher on a trial; `mean_target` is the dataset mean
/// target size, which sets both the found window and the patch size modes.
inline Scanpath run_greedy(const Trial& trial, const GreedyConfig& cfg, const DatasetSpec& spec,
                           std::pair<double, double> mean_target, const SimilarityContext& ctx = {},
                           const std::string& source_id = "greedy") {
  const auto attention = build_similarity(trial, cfg.attention, spec, ctx);
  const auto found = FoundPredicate::window(spec, mean_target.first, mean_target.second);
  const int budget = cfg.max_fixations > 0 ? cfg.max_fixations : spec.max_fixations;
  return greedy_search(attention, trial, found, resolve_patch(spec, mean_target, cfg), budget, source_id).scanpath;
}

}  // namespace vsearch
