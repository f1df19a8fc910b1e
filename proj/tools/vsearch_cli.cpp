// vsearch: preprocess datasets, run searchers, score scanpaths.

#include <CLI11.hpp>

#include <iostream>

#include "vsearch/vsearch.hpp"

int main(int argc, char** argv) {
  using namespace vsearch;
  CLI::App app{"Visual search scanpath simulation and benchmarking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string pre_root, pre_out;
  auto* pre = app.add_subcommand("preprocess", "Equalize a dataset (truncate at target, drop unusable trials)");
  pre->add_option("root", pre_root, "Dataset directory")->required();
  pre->add_option("out", pre_out, "Output directory")->required();

  std::string config_path;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> subset;
  auto* run = app.add_subcommand("run", "Run a searcher over a preprocessed dataset");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Seed for stochastic responses and subset selection");
  run->add_option("--subset", subset, "Evaluate a random subset of N trials")->check(CLI::PositiveNumber);

  std::string rep_dataset, rep_out;
  std::vector<std::string> rep_files;
  std::string correlation = "pearson";
  int min_fixations = 3;
  bool simplify = false;
  auto* report = app.add_subcommand("report", "Score scanpath files against a dataset");
  report->add_option("dataset", rep_dataset, "Dataset directory")->required();
  report->add_option("scanpaths", rep_files, "Model scanpath files");
  report->add_option("--out", rep_out, "Output directory")->required();
  report->add_option("--correlation", correlation, "pearson or spearman")
      ->check(CLI::IsMember({"pearson", "spearman"}));
  report->add_option("--min-fixations", min_fixations, "Fixations a scanpath needs to enter Multi-Match")
      ->check(CLI::PositiveNumber);
  report->add_flag("--simplify", simplify, "Enable Multi-Match scanpath simplification");

  std::string val_path;
  auto* validate = app.add_subcommand("validate", "Lint a dataset directory, FGRID map or scanpaths file");
  validate->add_option("path", val_path, "Path to check")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) {
      cmd_preprocess(pre_root, pre_out, &std::cout);
      return kExitOk;
    }
    if (run->parsed()) {
      RunConfig cfg = load_run_config(config_path);
      if (seed) {
        if (cfg.ibs) cfg.ibs->seed = *seed;
        if (cfg.subset) cfg.subset->seed = *seed;
      }
      if (subset) {
        if (!cfg.subset) cfg.subset = SubsetSpec{*subset, seed.value_or(0)};
        cfg.subset->n = *subset;
      }
      return cmd_run(cfg, jobs, &std::cerr).exit_code;
    }
    if (report->parsed()) {
      ReportOptions opts;
      opts.eligibility.min_fixations = min_fixations;
      opts.correlation = correlation == "spearman" ? CorrelationKind::spearman : CorrelationKind::pearson;
      std::vector<fs::path> files(rep_files.begin(), rep_files.end());
      if (simplify) {
        const auto ds = load_dataset(rep_dataset);
        opts.multimatch.simplify = default_simplification(std::hypot(ds.spec.image_width, ds.spec.image_height));
      }
      cmd_report(rep_dataset, files, rep_out, opts, &std::cout);
      return kExitOk;
    }
    if (validate->parsed()) {
      const auto res = cmd_validate(val_path);
      for (const auto& m : res.messages) std::cout << m << "\n";
      std::cout << (res.ok ? "OK" : "INVALID") << "\n";
      return res.ok ? kExitOk : kExitFatal;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitOk;
}
