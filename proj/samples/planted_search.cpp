// Runs the Bayesian searcher and the greedy searcher on a synthetic scene
// with one planted target and prints both scanpaths.

#include <iostream>

#include "vsearch/vsearch.hpp"

int main() {
  using namespace vsearch;
  DatasetSpec spec;  // 768x1024, 32-pixel cells
  spec.max_fixations = 12;

  Trial trial;
  trial.trial_id = "planted";
  trial.target_bbox = {600, 400, 32, 32};
  trial.initial_fixation = {512, 384};

  GridProblem problem;
  problem.prior = ProbabilityGrid(spec.grid_rows(), spec.grid_cols(), 1.0 / (spec.grid_rows() * spec.grid_cols()));
  problem.similarity = ProbabilityGrid(spec.grid_rows(), spec.grid_cols(), 0.5);
  const Cell target = grid_cell_of({616, 416}, spec);
  problem.similarity(target.row, target.col) = 1.0;
  problem.start = grid_cell_of(trial.initial_fixation, spec);
  problem.target_cells = bbox_grid_cells(trial.target_bbox, spec);
  problem.max_fixations = spec.max_fixations;

  const auto ibs = search_grid(problem, IbsConfig{}, 0);
  std::cout << "IBS (" << (ibs.found ? "found" : "not found") << "):";
  for (const auto& c : ibs.cells) std::cout << " (" << c.row << "," << c.col << ")";
  std::cout << "\n";

  Grid<double> attention(spec.image_height, spec.image_width, 0.1);
  attention(100, 100) = 0.9;  // decoy
  attention(416, 616) = 0.8;  // target
  const auto greedy = greedy_search(attention, trial, FoundPredicate::window(spec, 72, 72), {64, 64}, 12);
  std::cout << "Greedy (" << (greedy.scanpath.target_found ? "found" : "not found") << "):";
  for (const auto& f : greedy.scanpath.fixations) std::cout << " (" << f.x << "," << f.y << ")";
  std::cout << "\n";
}
