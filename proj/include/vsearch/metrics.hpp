#pragma once

// Efficiency and similarity metrics: cumulative performance curves and their
// area, Multi-Match scanpath similarity (shape, direction, length, position),
// within-human / human-model aggregation and cross-image correlation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include "vsearch/core.hpp"

namespace vsearch {

// ---------------------------------------------------------------------------
// Efficiency

struct CumulativeCurve {
  std::vector<double> values;  // values[n - 1] = fraction found within n saccades
};

inline CumulativeCurve cumulative_curve(const std::vector<Scanpath>& scanpaths, int n_max) {
  if (scanpaths.empty()) throw Error("cumulative curve of an empty scanpath set");
  if (n_max < 1) throw Error("n_max must be >= 1");
  std::vector<int> hits(n_max + 1, 0);
  for (const auto& s : scanpaths)
    if (s.target_found && s.saccade_count() <= n_max) ++hits[std::max(0, s.saccade_count())];
  CumulativeCurve curve;
  int running = hits[0];
  for (int n = 1; n <= n_max; ++n) {
    running += hits[n];
    curve.values.push_back(static_cast<double>(running) / static_cast<double>(scanpaths.size()));
  }
  return curve;
}

/// Normalized area: the mean of the curve values.
inline double auc(const CumulativeCurve& curve) {
  if (curve.values.size() < 2) throw Error("AUC needs a curve with at least 2 points");
  double s = 0.0;
  for (double v : curve.values) s += v;
  return s / static_cast<double>(curve.values.size());
}

// ---------------------------------------------------------------------------
// Multi-Match

struct MultiMatchScore {
  double shape = 0.0;
  double direction = 0.0;
  double length = 0.0;
  double position = 0.0;

  double avg() const { return (shape + direction + length + position) / 4.0; }

  friend bool operator==(const MultiMatchScore&, const MultiMatchScore&) = default;
};

struct Simplification {
  double amplitude = 0.0;  // pixels; merge when the combined saccade is shorter
  double direction = 0.0;  // radians; merge when consecutive saccades differ less
};

/// Default thresholds for a screen of diagonal `diag`: 10% of the diagonal
/// and 45 degrees.
inline Simplification default_simplification(double diag) { return {0.1 * diag, std::numbers::pi / 4}; }

struct SaccadeVector {
  double dx = 0.0, dy = 0.0;
  Fixation end;

  double amplitude() const { return std::hypot(dx, dy); }
};

inline std::vector<SaccadeVector> saccade_vectors(const std::vector<Fixation>& fix) {
  std::vector<SaccadeVector> out;
  for (std::size_t i = 0; i + 1 < fix.size(); ++i)
    out.push_back({fix[i + 1].x - fix[i].x, fix[i + 1].y - fix[i].y, fix[i + 1]});
  return out;
}

/// Unsigned angle between two vectors, in [0, pi].
inline double angle_between(double ax, double ay, double bx, double by) {
  const double d = std::abs(std::atan2(ax * by - ay * bx, ax * bx + ay * by));
  return std::min(d, std::numbers::pi);
}

/// Removes intermediate fixations while consecutive saccades can be merged.
inline std::vector<Fixation> simplify_scanpath(std::vector<Fixation> fix, const Simplification& t) {
  bool changed = true;
  while (changed && fix.size() > 2) {
    changed = false;
    for (std::size_t i = 1; i + 1 < fix.size(); ++i) {
      const double ax = fix[i].x - fix[i - 1].x, ay = fix[i].y - fix[i - 1].y;
      const double bx = fix[i + 1].x - fix[i].x, by = fix[i + 1].y - fix[i].y;
      const double combined = std::hypot(ax + bx, ay + by);
      if (combined < t.amplitude || angle_between(ax, ay, bx, by) < t.direction) {
        fix.erase(fix.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return fix;
}

struct Alignment {
  std::vector<std::pair<int, int>> path;  // aligned (i, j) saccade pairs
  double cost = 0.0;
};

/// Cheapest monotone path through the |u_i - v_j| cost matrix from (0,0) to
/// (n-1,m-1) with right/down/diagonal moves, found with Dijkstra. Path costs
/// accumulate from the start cell. Among minimal paths, the lexicographically
/// smallest (i, j) sequence is returned.
inline Alignment align_saccades(const std::vector<SaccadeVector>& a, const std::vector<SaccadeVector>& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  if (n == 0 || m == 0) throw Error("degenerate scanpath");
  auto cost = [&](int i, int j) { return std::hypot(a[i].dx - b[j].dx, a[i].dy - b[j].dy); };
  auto id = [m](int i, int j) { return static_cast<std::size_t>(i) * m + j; };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(n) * m, inf);
  std::vector<char> done(dist.size(), 0);
  using Item = std::tuple<double, int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[0] = cost(0, 0);
  queue.emplace(dist[0], 0, 0);
  constexpr int moves[3][2] = {{0, 1}, {1, 0}, {1, 1}};
  while (!queue.empty()) {
    const auto [d, i, j] = queue.top();
    queue.pop();
    if (done[id(i, j)]) continue;
    done[id(i, j)] = 1;
    for (const auto& mv : moves) {
      const int ni = i + mv[0], nj = j + mv[1];
      if (ni >= n || nj >= m) continue;
      const double nd = d + cost(ni, nj);
      if (nd < dist[id(ni, nj)]) {
        dist[id(ni, nj)] = nd;
        queue.emplace(nd, ni, nj);
      }
    }
  }

  // Cells from which the end is reachable through edges that are tight
  // (dist[next] == dist[cell] + cost[next]); those edges carry minimal paths.
  auto tight = [&](int i, int j, int ni, int nj) { return dist[id(i, j)] + cost(ni, nj) == dist[id(ni, nj)]; };
  std::vector<char> on_optimal(dist.size(), 0);
  on_optimal[id(n - 1, m - 1)] = 1;
  for (int i = n - 1; i >= 0; --i)
    for (int j = m - 1; j >= 0; --j) {
      if (i == n - 1 && j == m - 1) continue;
      for (const auto& mv : moves) {
        const int ni = i + mv[0], nj = j + mv[1];
        if (ni < n && nj < m && on_optimal[id(ni, nj)] && tight(i, j, ni, nj)) on_optimal[id(i, j)] = 1;
      }
    }

  Alignment al;
  al.cost = dist[id(n - 1, m - 1)];
  int i = 0, j = 0;
  al.path.emplace_back(0, 0);
  while (i != n - 1 || j != m - 1) {
    // Successors in lexicographic order: (i, j+1) < (i+1, j) < (i+1, j+1).
    bool moved = false;
    for (const auto& mv : moves) {
      const int ni = i + mv[0], nj = j + mv[1];
      if (ni < n && nj < m && on_optimal[id(ni, nj)] && tight(i, j, ni, nj)) {
        i = ni, j = nj, moved = true;
        break;
      }
    }
    if (!moved) throw Error("alignment path reconstruction failed");
    al.path.emplace_back(i, j);
  }
  return al;
}

struct MultiMatchOptions {
  std::optional<Simplification> simplify;  // off by default
};

/// Multi-Match similarity of two scanpaths on a screen of `width` x `height`
/// pixels. Symmetric in its arguments.
inline MultiMatchScore multimatch(const Scanpath& a, const Scanpath& b, double width, double height,
                                  const MultiMatchOptions& opts = {}) {
  if (a.fixations.size() < 2 || b.fixations.size() < 2) throw Error("degenerate scanpath");
  // Evaluate in a canonical argument order so the score is exactly symmetric
  // even when several alignments share the minimal cost.
  auto key = [](const Scanpath& s) {
    std::vector<double> k;
    for (const auto& f : s.fixations) k.insert(k.end(), {f.x, f.y});
    return k;
  };
  const bool swap = key(b) < key(a);
  const Scanpath& first = swap ? b : a;
  const Scanpath& second = swap ? a : b;

  const double diag = std::hypot(width, height);
  std::vector<Fixation> fa = first.fixations, fb = second.fixations;
  if (opts.simplify) {
    fa = simplify_scanpath(std::move(fa), *opts.simplify);
    fb = simplify_scanpath(std::move(fb), *opts.simplify);
  }
  const auto u = saccade_vectors(fa);
  const auto v = saccade_vectors(fb);
  const auto al = align_saccades(u, v);

  double shape = 0, direction = 0, length = 0, position = 0;
  for (const auto& [i, j] : al.path) {
    shape += std::hypot(u[i].dx - v[j].dx, u[i].dy - v[j].dy) / (2 * diag);
    length += std::abs(u[i].amplitude() - v[j].amplitude()) / diag;
    direction += angle_between(u[i].dx, u[i].dy, v[j].dx, v[j].dy) / std::numbers::pi;
    position += std::hypot(u[i].end.x - v[j].end.x, u[i].end.y - v[j].end.y) / diag;
  }
  const double k = static_cast<double>(al.path.size());
  auto sim = [k](double total) { return std::clamp(1.0 - total / k, 0.0, 1.0); };
  return {sim(shape), sim(direction), sim(length), sim(position)};
}

inline MultiMatchScore mean_score(const std::vector<MultiMatchScore>& scores) {
  if (scores.empty()) throw Error("mean of no Multi-Match scores");
  MultiMatchScore m;
  for (const auto& s : scores) {
    m.shape += s.shape;
    m.direction += s.direction;
    m.length += s.length;
    m.position += s.position;
  }
  const double n = static_cast<double>(scores.size());
  return {m.shape / n, m.direction / n, m.length / n, m.position / n};
}

struct MmEligibility {
  /// Minimum fixation count for a scanpath to enter Multi-Match statistics.
  int min_fixations = 3;
};

inline bool mm_eligible(const Scanpath& s, const MmEligibility& e) {
  return s.target_found && static_cast<int>(s.fixations.size()) >= e.min_fixations;
}

struct PairScore {
  std::string a;  // source ids
  std::string b;
  MultiMatchScore score;
};

struct WhHmResult {
  std::optional<MultiMatchScore> wh;  // within humans
  std::optional<MultiMatchScore> hm;  // model vs humans
  std::vector<PairScore> human_pairs;
  std::vector<PairScore> model_pairs;
};

/// whMM over all unordered pairs of eligible humans and hmMM of `model`
/// against every eligible human. A human whose source_id equals the model's
/// is left out of hmMM, so a replayed subject is never compared to itself.
inline WhHmResult wh_hm_mm(const std::vector<Scanpath>& humans, const Scanpath* model, double width, double height,
                           const MmEligibility& elig = {}, const MultiMatchOptions& opts = {}) {
  std::vector<const Scanpath*> ok;
  for (const auto& h : humans)
    if (mm_eligible(h, elig)) ok.push_back(&h);
  WhHmResult res;
  for (std::size_t i = 0; i < ok.size(); ++i)
    for (std::size_t j = i + 1; j < ok.size(); ++j)
      res.human_pairs.push_back({ok[i]->source_id, ok[j]->source_id, multimatch(*ok[i], *ok[j], width, height, opts)});
  if (ok.size() >= 2) {
    std::vector<MultiMatchScore> s;
    for (const auto& p : res.human_pairs) s.push_back(p.score);
    res.wh = mean_score(s);
  }
  if (model && mm_eligible(*model, elig)) {
    std::vector<MultiMatchScore> s;
    for (const Scanpath* h : ok) {
      if (h->source_id == model->source_id) continue;
      res.model_pairs.push_back({model->source_id, h->source_id, multimatch(*model, *h, width, height, opts)});
      s.push_back(res.model_pairs.back().score);
    }
    if (!s.empty()) res.hm = mean_score(s);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Correlation

struct XY {
  double x = 0.0;
  double y = 0.0;
};

/// Pearson correlation; nullopt when either axis has no variance.
inline std::optional<double> pearson(const std::vector<XY>& pts) {
  if (pts.size() < 3) throw Error("correlation needs at least 3 points");
  double mx = 0, my = 0;
  for (const auto& p : pts) mx += p.x, my += p.y;
  mx /= pts.size(), my /= pts.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& p : pts) {
    sxy += (p.x - mx) * (p.y - my);
    sxx += (p.x - mx) * (p.x - mx);
    syy += (p.y - my) * (p.y - my);
  }
  if (!(sxx > 0) || !(syy > 0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace detail {

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace detail

inline std::optional<double> spearman(const std::vector<XY>& pts) {
  std::vector<double> xs, ys;
  for (const auto& p : pts) xs.push_back(p.x), ys.push_back(p.y);
  const auto rx = detail::ranks(xs), ry = detail::ranks(ys);
  std::vector<XY> ranked;
  for (std::size_t i = 0; i < pts.size(); ++i) ranked.push_back({rx[i], ry[i]});
  return pearson(ranked);
}

enum class CorrelationKind { pearson, spearman };

/// Correlation between per-image (hmMM avg, whMM avg) points.
inline std::optional<double> mm_correlation(const std::vector<XY>& points, CorrelationKind kind = CorrelationKind::pearson) {
  return kind == CorrelationKind::pearson ? pearson(points) : spearman(points);
}

}  // namespace vsearch
