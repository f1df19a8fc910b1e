#pragma once

// Ideal Bayesian searcher over a grid of fovea-sized cells. The posterior over
// target location accumulates evidence d'^2 * (W - 0.5) at every fixation,
// where d' is a Gaussian visibility map around the fixated cell and W is the
// observed target-similarity response. The next fixation maximizes the
// posterior-weighted squared visibility (ideal rule) or the posterior itself
// (map_greedy rule). Visited cells are never selected again.

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vsearch/core.hpp"
#include "vsearch/dataset_io.hpp"
#include "vsearch/preprocess.hpp"
#include "vsearch/similarity.hpp"

namespace vsearch {

enum class PriorKind { uniform, center_gaussian, external_map };
enum class SelectionRule { ideal, map_greedy };

struct PriorSpec {
  PriorKind kind = PriorKind::uniform;
  double sigma_frac = 0.25;  // center_gaussian: sigma as a fraction of each grid side
  std::string map_path;      // external_map: FGRID path, "{trial_id}" expanded

  static PriorSpec uniform() { return {}; }
  static PriorSpec center_gaussian(double frac) { return {PriorKind::center_gaussian, frac, {}}; }
  static PriorSpec external(std::string path) { return {PriorKind::external_map, 0.25, std::move(path)}; }
};

struct IbsConfig {
  SimilaritySource similarity;
  PriorSpec prior;
  double visibility_sigma = 3.0;  // grid cells
  double visibility_peak = 3.0;   // d' at the fixated cell
  SelectionRule selection_rule = SelectionRule::ideal;
  double response_noise = 0.0;
  std::uint64_t seed = 0;
  /// Template matching and priors are computed at this resolution; empty
  /// keeps the native image size.
  std::optional<Dims> working = Dims{768, 1024};

  void validate() const {
    if (!(visibility_sigma > 0)) throw Error("visibility_sigma must be > 0");
    if (!(visibility_peak > 0)) throw Error("visibility_peak must be > 0");
    if (!(response_noise >= 0)) throw Error("response_noise must be >= 0");
    if (prior.kind == PriorKind::center_gaussian && !(prior.sigma_frac > 0))
      throw Error("center_gaussian prior needs sigma_frac > 0");
    if (prior.kind == PriorKind::external_map && prior.map_path.empty())
      throw Error("external_map prior requires a path");
    similarity.validate();
  }
};

inline constexpr double kPriorFloor = 1e-6;
inline constexpr double kVisibilityFloor = 1e-6;

/// Sum-to-one copy of a nonnegative grid after flooring every cell at `floor`.
inline ProbabilityGrid floor_and_normalize(ProbabilityGrid g, double floor = kPriorFloor) {
  double total = 0.0;
  for (double v : g) total += v;
  if (!(total > 0)) {
    for (double& v : g) v = 1.0;
    total = static_cast<double>(g.size());
  }
  for (double& v : g) v = std::max(v / total, floor);
  total = 0.0;
  for (double v : g) total += v;
  for (double& v : g) v /= total;
  return g;
}

inline ProbabilityGrid make_prior(const Trial& trial, const IbsConfig& cfg, const DatasetSpec& spec,
                                  const fs::path& dataset_root = {}) {
  const int rows = spec.grid_rows(), cols = spec.grid_cols();
  switch (cfg.prior.kind) {
    case PriorKind::uniform:
      return ProbabilityGrid(rows, cols, 1.0 / (static_cast<double>(rows) * cols));
    case PriorKind::center_gaussian: {
      ProbabilityGrid g(rows, cols);
      const double cr = (rows - 1) / 2.0, cc = (cols - 1) / 2.0;
      const double sr = cfg.prior.sigma_frac * rows, sc = cfg.prior.sigma_frac * cols;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          g(r, c) = std::exp(-0.5 * ((r - cr) * (r - cr) / (sr * sr) + (c - cc) * (c - cc) / (sc * sc)));
      return floor_and_normalize(std::move(g));
    }
    case PriorKind::external_map: {
      fs::path path = expand_trial_pattern(cfg.prior.map_path, trial.trial_id);
      if (path.is_relative()) path = dataset_root / path;
      if (!fs::exists(path)) throw Error("missing prior map " + path.string());
      const auto full = load_map(path, spec.image_height, spec.image_width);
      return floor_and_normalize(downsample_to_grid(full, spec));
    }
  }
  throw Error("unknown prior kind");
}

/// Gaussian visibility d' around `fix`, in grid-cell units.
inline ProbabilityGrid visibility(const Cell& fix, const IbsConfig& cfg, int rows, int cols) {
  ProbabilityGrid g(rows, cols);
  const double two_s2 = 2.0 * cfg.visibility_sigma * cfg.visibility_sigma;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double d2 = static_cast<double>((r - fix.row) * (r - fix.row) + (c - fix.col) * (c - fix.col));
      g(r, c) = cfg.visibility_peak * std::exp(-d2 / two_s2);
    }
  return g;
}

struct SearchState {
  ProbabilityGrid posterior;      // sums to 1
  ProbabilityGrid log_posterior;  // log of posterior up to a constant
  std::vector<Cell> fixation_history;
  int step = 0;

  static SearchState from_prior(const ProbabilityGrid& prior, const Cell& start) {
    SearchState s;
    s.posterior = prior;
    s.log_posterior = prior;
    for (double& v : s.log_posterior) v = std::log(v);
    s.fixation_history = {start};
    return s;
  }

  bool visited(const Cell& c) const {
    return std::find(fixation_history.begin(), fixation_history.end(), c) != fixation_history.end();
  }
};

namespace detail {

inline void renormalize(SearchState& s) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : s.log_posterior) hi = std::max(hi, v);
  double total = 0.0;
  for (double v : s.log_posterior) total += std::exp(v - hi);
  const double lse = hi + std::log(total);
  for (std::size_t i = 0; i < s.posterior.size(); ++i) {
    s.log_posterior[i] -= lse;
    s.posterior[i] = std::exp(s.log_posterior[i]);
  }
}

}  // namespace detail

/// Adds the evidence gathered at `fix`. With response_noise > 0 the
/// similarity responses are perturbed with zero-mean Gaussian noise whose
/// spread grows as visibility falls; `rng` must then be non-null.
inline SearchState update_posterior(SearchState state, const Cell& fix, const ProbabilityGrid& similarity_grid,
                                    const IbsConfig& cfg, std::mt19937_64* rng = nullptr) {
  const int rows = state.posterior.rows(), cols = state.posterior.cols();
  if (similarity_grid.rows() != rows || similarity_grid.cols() != cols)
    throw Error("similarity grid dimensions do not match the posterior");
  const auto dprime = visibility(fix, cfg, rows, cols);
  const bool noisy = cfg.response_noise > 0;
  if (noisy && !rng) throw Error("stochastic update needs a random generator");
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < state.posterior.size(); ++i) {
    double response = similarity_grid[i];
    if (noisy) response += unit(*rng) * cfg.response_noise / std::max(dprime[i], kVisibilityFloor);
    state.log_posterior[i] += dprime[i] * dprime[i] * (response - 0.5);
  }
  detail::renormalize(state);
  return state;
}

/// Expected squared detectability of the target when fixating each cell,
/// under the current posterior.
inline ProbabilityGrid ideal_scores(const ProbabilityGrid& posterior, const IbsConfig& cfg) {
  const int rows = posterior.rows(), cols = posterior.cols();
  // Kernel of exp(-d^2 / sigma^2) indexed by (|dr|, |dc|).
  Grid<double> kernel(rows, cols);
  const double s2 = cfg.visibility_sigma * cfg.visibility_sigma;
  for (int dr = 0; dr < rows; ++dr)
    for (int dc = 0; dc < cols; ++dc) kernel(dr, dc) = std::exp(-static_cast<double>(dr * dr + dc * dc) / s2);
  const double peak2 = cfg.visibility_peak * cfg.visibility_peak;
  ProbabilityGrid score(rows, cols, 0.0);
  for (int kr = 0; kr < rows; ++kr)
    for (int kc = 0; kc < cols; ++kc) {
      double s = 0.0;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) s += posterior(r, c) * kernel(std::abs(r - kr), std::abs(c - kc));
      score(kr, kc) = peak2 * s;
    }
  return score;
}

inline constexpr double kScoreTieTolerance = 1e-12;

/// Next cell to fixate. Throws when every cell has been visited.
inline Cell select_next(const SearchState& state, const IbsConfig& cfg) {
  const ProbabilityGrid score =
      cfg.selection_rule == SelectionRule::ideal ? ideal_scores(state.posterior, cfg) : state.posterior;
  const Cell current = state.fixation_history.back();
  std::optional<Cell> best;
  double best_score = 0.0;
  int best_dist = 0;
  for (int r = 0; r < score.rows(); ++r) {
    for (int c = 0; c < score.cols(); ++c) {
      const Cell cand{r, c};
      if (state.visited(cand)) continue;
      const double s = score(r, c);
      const int dist = (r - current.row) * (r - current.row) + (c - current.col) * (c - current.col);
      if (!best) {
        best = cand, best_score = s, best_dist = dist;
        continue;
      }
      const double tol = kScoreTieTolerance * std::max(std::abs(s), std::abs(best_score));
      // Row-major scanning already prefers the earlier cell on a full tie.
      if (s > best_score + tol || (std::abs(s - best_score) <= tol && dist < best_dist))
        best = cand, best_score = s, best_dist = dist;
    }
  }
  if (!best) throw Error("search space exhausted");
  return *best;
}

/// Grid-level search: everything the searcher needs, already on the grid.
struct GridProblem {
  ProbabilityGrid prior;       // normalized
  ProbabilityGrid similarity;  // values in [0, 1]
  Cell start;
  std::set<Cell> target_cells;
  int max_fixations = 1;
};

struct GridSearchResult {
  std::vector<Cell> cells;  // including the start cell
  bool found = false;
};

inline GridSearchResult search_grid(const GridProblem& problem, const IbsConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SearchState state = SearchState::from_prior(problem.prior, problem.start);
  GridSearchResult res;
  for (;;) {
    const Cell current = state.fixation_history.back();
    if (problem.target_cells.contains(current)) {
      res.found = true;
      break;
    }
    if (state.step >= problem.max_fixations) break;
    state = update_posterior(std::move(state), current, problem.similarity, cfg, &rng);
    Cell next;
    try {
      next = select_next(state, cfg);
    } catch (const Error&) {
      break;  // exhausted: not found
    }
    state.fixation_history.push_back(next);
    ++state.step;
  }
  res.cells = state.fixation_history;
  return res;
}

inline std::uint64_t trial_seed(std::uint64_t seed, const std::string& trial_id) {
  return seed ^ stable_hash(trial_id);
}

/// Runs one IBS search on a trial. The first emitted fixation is the trial's
/// own initial fixation; later ones are centers of the selected cells.
inline Scanpath run_search(const Trial& trial, const IbsConfig& cfg, const DatasetSpec& spec,
                           const fs::path& dataset_root = {}, const fs::path& cache_dir = {},
                           const std::string& source_id = "ibs") {
  cfg.validate();
  const SimilarityContext ctx{dataset_root, cfg.working, cache_dir};
  GridProblem problem;
  problem.prior = make_prior(trial, cfg, spec, dataset_root);
  problem.similarity = downsample_to_grid(build_similarity(trial, cfg.similarity, spec, ctx), spec);
  problem.start = grid_cell_of(trial.initial_fixation, spec);
  problem.target_cells = bbox_grid_cells(trial.target_bbox, spec);
  problem.max_fixations = spec.max_fixations;

  const auto res = search_grid(problem, cfg, trial_seed(cfg.seed, trial.trial_id));
  Scanpath out;
  out.source_id = source_id;
  out.max_fixations = spec.max_fixations;
  out.target_found = res.found;
  out.fixations.push_back(trial.initial_fixation);
  for (std::size_t i = 1; i < res.cells.size(); ++i) out.fixations.push_back(cell_center(res.cells[i], spec));
  return out;
}

}  // namespace vsearch
