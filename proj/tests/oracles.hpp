#pragma once

// Independent reference computations used to check the library. Each one
// follows the plain definition with no shared code path beyond core types.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "vsearch/core.hpp"
#include "vsearch/metrics.hpp"

namespace oracle {

using vsearch::Grid;

/// Normalized cross-correlation by direct double loop over a zero-padded
/// window centered on each pixel.
inline Grid<double> ncc(const Grid<double>& img, const Grid<double>& t) {
  const int th = t.rows(), tw = t.cols();
  Grid<double> out(img.rows(), img.cols(), 0.0);
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      std::vector<double> w, tv;
      for (int i = 0; i < th; ++i)
        for (int j = 0; j < tw; ++j) {
          const int y = r - th / 2 + i, x = c - tw / 2 + j;
          w.push_back(y >= 0 && y < img.rows() && x >= 0 && x < img.cols() ? img(y, x) : 0.0);
          tv.push_back(t(i, j));
        }
      double mw = 0, mt = 0;
      for (std::size_t k = 0; k < w.size(); ++k) mw += w[k], mt += tv[k];
      mw /= w.size(), mt /= tv.size();
      double num = 0, vw = 0, vt = 0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        num += (w[k] - mw) * (tv[k] - mt);
        vw += (w[k] - mw) * (w[k] - mw);
        vt += (tv[k] - mt) * (tv[k] - mt);
      }
      out(r, c) = (vw < 1e-9 || vt < 1e-9) ? 0.0 : num / std::sqrt(vw * vt);
    }
  return out;
}

/// Mean SSIM of two equally sized patches, each local window built as an
/// explicit 2D Gaussian (sigma 1.5, radius 5) restricted to the patch.
inline double patch_ssim(const std::vector<double>& x, const std::vector<double>& y, int h, int w) {
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0;
  for (int a = 0; a < h; ++a)
    for (int b = 0; b < w; ++b) {
      double ws = 0, mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          if (std::abs(i - a) > 5 || std::abs(j - b) > 5) continue;
          const double g = std::exp(-((i - a) * (i - a) + (j - b) * (j - b)) / (2 * 1.5 * 1.5));
          const double xv = x[i * w + j], yv = y[i * w + j];
          ws += g, mx += g * xv, my += g * yv, xx += g * xv * xv, yy += g * yv * yv, xy += g * xv * yv;
        }
      mx /= ws, my /= ws, xx /= ws, yy /= ws, xy /= ws;
      const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
      total += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / (h * w);
}

/// Region-averaged SSIM map with border trimming, one region at a time.
inline Grid<double> ssim(const Grid<double>& img, const Grid<double>& t) {
  Grid<double> out(img.rows(), img.cols());
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      std::vector<double> x, y;
      int h = 0, w = 0;
      for (int i = 0; i < t.rows(); ++i) {
        const int yy = r - t.rows() / 2 + i;
        if (yy < 0 || yy >= img.rows()) continue;
        ++h;
        w = 0;
        for (int j = 0; j < t.cols(); ++j) {
          const int xx = c - t.cols() / 2 + j;
          if (xx < 0 || xx >= img.cols()) continue;
          ++w;
          x.push_back(t(i, j));
          y.push_back(img(yy, xx));
        }
      }
      out(r, c) = patch_ssim(x, y, h, w);
    }
  return out;
}

/// Cells of an integer-aligned target square, by enumerating every pixel of
/// the square and collecting the cells that contain them.
inline std::set<vsearch::Cell> square_cells_by_pixels(int x0, int y0, int x1, int y1, int cell, int height, int width) {
  std::set<vsearch::Cell> out;
  for (int y = std::max(0, y0); y < std::min(height, y1); ++y)
    for (int x = std::max(0, x0); x < std::min(width, x1); ++x) out.insert({y / cell, x / cell});
  return out;
}

/// Block means, partial edge blocks averaging the pixels they contain.
inline Grid<double> block_mean(const Grid<double>& m, int cell) {
  const int gr = (m.rows() + cell - 1) / cell, gc = (m.cols() + cell - 1) / cell;
  Grid<double> sum(gr, gc, 0.0), count(gr, gc, 0.0);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      sum(r / cell, c / cell) += m(r, c);
      count(r / cell, c / cell) += 1;
    }
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= count[i];
  return sum;
}

/// Minimal cost over every monotone right/down/diagonal path, each path's
/// cost summed from the start cell.
inline double min_path_cost(const std::vector<vsearch::SaccadeVector>& a, const std::vector<vsearch::SaccadeVector>& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  auto cost = [&](int i, int j) { return std::hypot(a[i].dx - b[j].dx, a[i].dy - b[j].dy); };
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, acc);
      return;
    }
    if (j + 1 < m) walk(i, j + 1, acc + cost(i, j + 1));
    if (i + 1 < n) walk(i + 1, j, acc + cost(i + 1, j));
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc + cost(i + 1, j + 1));
  };
  walk(0, 0, cost(0, 0));
  return best;
}

/// Fraction of scanpaths found within each budget, by direct counting.
inline std::vector<double> curve_by_counting(const std::vector<vsearch::Scanpath>& s, int n_max) {
  std::vector<double> out;
  for (int n = 1; n <= n_max; ++n) {
    int k = 0;
    for (const auto& p : s)
      if (p.target_found && static_cast<int>(p.fixations.size()) - 1 <= n) ++k;
    out.push_back(static_cast<double>(k) / s.size());
  }
  return out;
}

/// Pearson correlation as covariance over the product of standard deviations.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxy += x[i] * y[i], sxx += x[i] * x[i], syy += y[i] * y[i];
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  return cov / std::sqrt((sxx / n - (sx / n) * (sx / n)) * (syy / n - (sy / n) * (sy / n)));
}

}  // namespace oracle
