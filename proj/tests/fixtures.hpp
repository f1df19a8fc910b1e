#pragma once

// Synthetic datasets written to temporary directories.

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vsearch/vsearch.hpp"

namespace fixture {

namespace fs = std::filesystem;
using namespace vsearch;

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("vsearch_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline DatasetSpec small_spec() {
  DatasetSpec s;
  s.name = "synthetic";
  s.image_height = 192;
  s.image_width = 256;
  s.fovea_size = 32;
  s.cell_size = 32;
  s.max_fixations = 6;
  return s;
}

inline GrayImage random_texture(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 255);
  GrayImage g(rows, cols);
  // Blocky noise so template matching has structure at several scales.
  for (int r = 0; r < rows; r += 4)
    for (int c = 0; c < cols; c += 4) {
      const double v = std::round(u(rng));
      for (int i = r; i < std::min(rows, r + 4); ++i)
        for (int j = c; j < std::min(cols, c + 4); ++j) g(i, j) = v;
    }
  return g;
}

inline GrayImage crop(const GrayImage& g, const BoundingBox& b) {
  GrayImage out(b.h, b.w);
  for (int r = 0; r < b.h; ++r)
    for (int c = 0; c < b.w; ++c) out(r, c) = g(b.y + r, b.x + c);
  return out;
}

struct Options {
  int trials = 5;
  int trivial = 0;            // trailing trials whose initial fixation is on target
  int subjects = 3;
  bool unsuccessful_one = true;  // subject s3 misses the target in trial 0
  bool attention_maps = true;
  std::uint64_t seed = 7;
};

/// Writes dataset.json, trials.json, images, templates and attention maps.
/// Human scanpaths walk from the initial fixation towards the target with
/// per-subject detours and end on it.
inline std::vector<Trial> write_dataset(const fs::path& root, const Options& opt = {}) {
  const DatasetSpec spec = small_spec();
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> bx(0, spec.image_width - 24), by(0, spec.image_height - 24);
  std::uniform_real_distribution<double> jitter(-20, 20);
  std::vector<Trial> trials;
  for (int t = 0; t < opt.trials + opt.trivial; ++t) {
    Trial trial;
    trial.trial_id = "t" + std::to_string(t);
    trial.target_category = "thing";
    const GrayImage img = random_texture(spec.image_height, spec.image_width, rng);
    // Keep the target away from the start so every non-trivial trial needs a saccade.
    BoundingBox b{};
    Fixation start{};
    do {
      b = {bx(rng), by(rng), 24, 24};
      start = {std::uniform_real_distribution<double>(0, spec.image_width)(rng),
               std::uniform_real_distribution<double>(0, spec.image_height)(rng)};
    } while (std::hypot(start.x - b.center_x(), start.y - b.center_y()) < 96);
    trial.target_bbox = b;
    const bool trivial = t >= opt.trials;
    trial.initial_fixation = trivial ? Fixation{b.center_x(), b.center_y()} : start;
    trial.image_ref = "images/" + trial.trial_id + ".pgm";
    trial.target_template_ref = "templates/" + trial.trial_id + ".pgm";
    save_pgm(img, root / trial.image_ref);
    save_pgm(crop(img, b), root / trial.target_template_ref);

    for (int s = 0; s < opt.subjects; ++s) {
      Scanpath p;
      p.source_id = "s" + std::to_string(s + 1);
      p.max_fixations = spec.max_fixations;
      p.fixations.push_back(trial.initial_fixation);
      const int steps = 2 + (s + t) % 3;
      for (int k = 1; k < steps; ++k) {
        const double a = static_cast<double>(k) / steps;
        p.fixations.push_back(clamp_to_image({start.x + a * (b.center_x() - start.x) + jitter(rng),
                                              start.y + a * (b.center_y() - start.y) + jitter(rng)},
                                             spec.image_height, spec.image_width));
      }
      const bool miss = opt.unsuccessful_one && t == 0 && s == 2;
      if (!miss) {
        p.fixations.push_back({b.center_x(), b.center_y()});
        p.fixations.push_back({b.center_x() + 1, b.center_y() + 1});  // post-hit fixation, truncated away
      }
      p.target_found = !miss;
      trial.human_scanpaths.push_back(p);
    }

    if (opt.attention_maps) {
      // Half-resolution attention map peaking on the target, with a decoy.
      Grid<double> att(spec.image_height / 2, spec.image_width / 2, 0.0);
      for (int r = 0; r < att.rows(); ++r)
        for (int c = 0; c < att.cols(); ++c) {
          const double dx = 2 * c - b.center_x(), dy = 2 * r - b.center_y();
          const double ex = 2 * c - (spec.image_width - b.center_x()), ey = 2 * r - (spec.image_height - b.center_y());
          att(r, c) = std::exp(-(dx * dx + dy * dy) / 800.0) + 0.6 * std::exp(-(ex * ex + ey * ey) / 800.0);
        }
      save_map(att, root / ("attention/" + trial.trial_id + ".fgrid"));
    }
    trials.push_back(trial);
  }
  save_dataset(spec, trials, root);
  return trials;
}

inline std::string slurp(const fs::path& p) { return read_text(p); }

}  // namespace fixture
