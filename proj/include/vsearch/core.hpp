#pragma once

// Shared domain types for the visual search engine. Coordinates are always
// (x = column, y = row) in image pixels, y growing downwards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vsearch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Fixation {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Fixation&, const Fixation&) = default;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Scanpath {
  std::string source_id;
  std::vector<Fixation> fixations;
  bool target_found = false;
  int max_fixations = 1;

  int saccade_count() const { return static_cast<int>(fixations.size()) - 1; }

  friend bool operator==(const Scanpath&, const Scanpath&) = default;
};

struct Trial {
  std::string trial_id;
  std::string image_ref;
  std::string target_template_ref;  // empty when absent
  BoundingBox target_bbox;
  std::string target_category;
  Fixation initial_fixation;
  std::vector<Scanpath> human_scanpaths;

  bool has_template() const { return !target_template_ref.empty(); }

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct DatasetSpec {
  std::string name;
  int image_height = 768;
  int image_width = 1024;
  int fovea_size = 32;
  int max_fixations = 12;
  int cell_size = 32;
  bool color = false;

  int grid_rows() const { return (image_height + cell_size - 1) / cell_size; }
  int grid_cols() const { return (image_width + cell_size - 1) / cell_size; }

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Dense row-major 2D array. Used for images, similarity maps, priors and
/// posteriors alike.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0) throw Error("grid dimensions must be positive");
    values_.assign(static_cast<std::size_t>(rows) * cols, fill);
  }
  Grid(int rows, int cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows <= 0 || cols <= 0) throw Error("grid dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(rows) * cols)
      throw Error("grid value count does not match dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return values_[static_cast<std::size_t>(r) * cols_ + c];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> values_;
};

using ProbabilityGrid = Grid<double>;

inline Cell grid_cell_of(const Fixation& f, const DatasetSpec& spec) {
  const int r = static_cast<int>(std::floor(f.y / spec.cell_size));
  const int c = static_cast<int>(std::floor(f.x / spec.cell_size));
  return {std::clamp(r, 0, spec.grid_rows() - 1), std::clamp(c, 0, spec.grid_cols() - 1)};
}

/// Pixel center of a grid cell. Edge cells that are only partially inside the
/// image are centered on their visible part.
inline Fixation cell_center(const Cell& cell, const DatasetSpec& spec) {
  const double x0 = cell.col * spec.cell_size;
  const double y0 = cell.row * spec.cell_size;
  const double x1 = std::min<double>((cell.col + 1) * spec.cell_size, spec.image_width);
  const double y1 = std::min<double>((cell.row + 1) * spec.cell_size, spec.image_height);
  return {(x0 + x1) / 2.0, (y0 + y1) / 2.0};
}

/// Half-open pixel interval [lo, hi) along one axis.
struct Span {
  double lo = 0.0;
  double hi = 0.0;
};

/// Extent of the target square (side max(w, h), centered on the box) clipped
/// to the image. First element is the x span, second the y span.
inline std::pair<Span, Span> target_square(const BoundingBox& b, const DatasetSpec& spec) {
  const double side = std::max(b.w, b.h);
  const double cx = b.center_x();
  const double cy = b.center_y();
  Span xs{std::max(0.0, cx - side / 2.0), std::min<double>(spec.image_width, cx + side / 2.0)};
  Span ys{std::max(0.0, cy - side / 2.0), std::min<double>(spec.image_height, cy + side / 2.0)};
  return {xs, ys};
}

/// Grid cells whose pixel rectangle overlaps the target square by at least
/// one pixel along both axes.
inline std::set<Cell> bbox_grid_cells(const BoundingBox& b, const DatasetSpec& spec) {
  const auto [xs, ys] = target_square(b, spec);
  const int cs = spec.cell_size;
  auto covered = [cs](const Span& s, int limit) {
    std::vector<int> idx;
    for (int i = 0; i < limit; ++i) {
      const double overlap = std::min<double>(s.hi, (i + 1.0) * cs) - std::max<double>(s.lo, i * cs);
      if (overlap >= 1.0) idx.push_back(i);
    }
    return idx;
  };
  std::set<Cell> cells;
  for (int r : covered(ys, spec.grid_rows()))
    for (int c : covered(xs, spec.grid_cols())) cells.insert({r, c});
  return cells;
}

inline bool inside_image(const Fixation& f, const DatasetSpec& spec) {
  return f.x >= 0.0 && f.y >= 0.0 && f.x < spec.image_width && f.y < spec.image_height;
}

inline bool inside_image(const BoundingBox& b, const DatasetSpec& spec) {
  return b.w > 0 && b.h > 0 && b.x >= 0 && b.y >= 0 && b.x + b.w <= spec.image_width &&
         b.y + b.h <= spec.image_height;
}

/// Largest coordinate strictly below `limit`, so clamped fixations keep x < width.
inline double clamp_coordinate(double v, int limit) {
  return std::clamp(v, 0.0, std::nextafter(static_cast<double>(limit), 0.0));
}

inline Fixation clamp_to_image(const Fixation& f, int height, int width) {
  return {clamp_coordinate(f.x, width), clamp_coordinate(f.y, height)};
}

/// FNV-1a, used wherever a string must map to a platform-stable 64-bit key.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace vsearch
