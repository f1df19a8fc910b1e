#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vsearch/core.hpp"

using namespace vsearch;

namespace {

DatasetSpec interiors() { return DatasetSpec{}; }

}  // namespace

TEST(GridCell, Origin) {
  EXPECT_EQ(grid_cell_of({0, 0}, interiors()), (Cell{0, 0}));
}

TEST(GridCell, FarCornerOfInteriorsGrid) {
  const auto spec = interiors();
  EXPECT_EQ(spec.grid_rows(), 24);
  EXPECT_EQ(spec.grid_cols(), 32);
  EXPECT_EQ(grid_cell_of({1023.9, 767.9}, spec), (Cell{23, 31}));
}

TEST(GridCell, FloorDivision) {
  EXPECT_EQ(grid_cell_of({33, 31}, interiors()), (Cell{0, 1}));
}

TEST(GridCell, ClampsOutsideCoordinates) {
  EXPECT_EQ(grid_cell_of({-5, 2000}, interiors()), (Cell{23, 0}));
}

TEST(GridCell, CeilingDivisionLeavesPartialEdgeCells) {
  DatasetSpec s;
  s.image_height = 70;
  s.image_width = 70;
  EXPECT_EQ(s.grid_rows(), 3);
  EXPECT_EQ(s.grid_cols(), 3);
  EXPECT_EQ(cell_center({2, 2}, s), (Fixation{67, 67}));
}

TEST(GridCell, CenterOfCellMapsBack) {
  const auto spec = interiors();
  for (int r = 0; r < spec.grid_rows(); ++r)
    for (int c = 0; c < spec.grid_cols(); ++c) EXPECT_EQ(grid_cell_of(cell_center({r, c}, spec), spec), (Cell{r, c}));
}

TEST(BboxCells, AlignedBox) {
  EXPECT_EQ(bbox_grid_cells({32, 32, 32, 32}, interiors()), (std::set<Cell>{{1, 1}}));
}

TEST(BboxCells, SmallBoxStraddlingFourCells) {
  EXPECT_EQ(bbox_grid_cells({30, 30, 4, 4}, interiors()), (std::set<Cell>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
}

TEST(BboxCells, TallBoxIsSquaredAndClipped) {
  EXPECT_EQ(bbox_grid_cells({0, 0, 10, 70}, interiors()),
            (std::set<Cell>{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}}));
}

TEST(BboxCells, OverlapBelowOnePixelIsIgnored) {
  // Square [31.5, 63.5) touches cell column 0 by half a pixel only.
  DatasetSpec s = interiors();
  const auto cells = bbox_grid_cells({32, 32, 31, 32}, s);
  EXPECT_EQ(cells, (std::set<Cell>{{1, 1}}));
}

TEST(BboxCellsProperty, MatchesPixelEnumerationOnIntegerSquares) {
  std::mt19937_64 rng(11);
  const auto spec = interiors();
  std::uniform_int_distribution<int> pos(0, 900), size(1, 120);
  for (int k = 0; k < 500; ++k) {
    // Equal-parity sides keep the centered square on integer pixel bounds.
    int w = size(rng), h = size(rng);
    if ((w - h) % 2) ++h;
    const BoundingBox b{std::min(pos(rng), spec.image_width - w), std::min(pos(rng) % 700, spec.image_height - h), w, h};
    const int side = std::max(w, h);
    const int x0 = b.x + (w - side) / 2, y0 = b.y + (h - side) / 2;
    EXPECT_EQ(bbox_grid_cells(b, spec),
              oracle::square_cells_by_pixels(x0, y0, x0 + side, y0 + side, spec.cell_size, spec.image_height,
                                             spec.image_width));
  }
}

TEST(BboxCellsProperty, CenteredEnlargementNeverRemovesCells) {
  std::mt19937_64 rng(12);
  const auto spec = interiors();
  std::uniform_int_distribution<int> pos(100, 600), size(1, 80), grow(0, 40);
  for (int k = 0; k < 500; ++k) {
    const BoundingBox b{pos(rng), pos(rng) % 500, size(rng), size(rng)};
    const int g = grow(rng);
    const BoundingBox big{b.x - g, b.y - g, b.w + 2 * g, b.h + 2 * g};
    const auto small_cells = bbox_grid_cells(b, spec), big_cells = bbox_grid_cells(big, spec);
    for (const auto& c : small_cells) EXPECT_TRUE(big_cells.contains(c));
  }
}

TEST(BboxCellsProperty, FixationsInsideSquareLandInItsCells) {
  std::mt19937_64 rng(13);
  const auto spec = interiors();
  std::uniform_int_distribution<int> pos(0, 700), size(1, 100);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 500; ++k) {
    const BoundingBox b{pos(rng) % (spec.image_width - 100), pos(rng) % (spec.image_height - 100), size(rng), size(rng)};
    const auto [xs, ys] = target_square(b, spec);
    const auto cells = bbox_grid_cells(b, spec);
    for (int j = 0; j < 10; ++j) {
      // Stay one pixel inside so the overlap rule and the fixation agree.
      const Fixation f{xs.lo + 0.5 + u(rng) * (xs.hi - xs.lo - 1), ys.lo + 0.5 + u(rng) * (ys.hi - ys.lo - 1)};
      if (xs.hi - xs.lo < 1 || ys.hi - ys.lo < 1) continue;
      const Cell c = grid_cell_of(f, spec);
      const double ox = std::min(xs.hi, (c.col + 1.0) * spec.cell_size) - std::max(xs.lo, 1.0 * c.col * spec.cell_size);
      const double oy = std::min(ys.hi, (c.row + 1.0) * spec.cell_size) - std::max(ys.lo, 1.0 * c.row * spec.cell_size);
      if (ox >= 1 && oy >= 1) {
        EXPECT_TRUE(cells.contains(c));
      }
    }
  }
}

TEST(Grid, RejectsBadDimensions) {
  EXPECT_THROW(Grid<double>(0, 3), Error);
  EXPECT_THROW(Grid<double>(2, 2, std::vector<double>{1, 2, 3}), Error);
}

TEST(Clamp, KeepsCoordinatesStrictlyInside) {
  const Fixation f = clamp_to_image({1024, -3}, 768, 1024);
  EXPECT_LT(f.x, 1024);
  EXPECT_EQ(f.y, 0);
  EXPECT_EQ(grid_cell_of(f, interiors()).col, 31);
}

TEST(Hash, StableValues) {
  EXPECT_EQ(stable_hash(""), 14695981039346656037ULL);
  EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cULL);
}
