#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "fixtures.hpp"
#include "vsearch/pipeline.hpp"

using namespace vsearch;
using fixture::TempDir;

namespace {

json ibs_config_json(const fs::path& dataset, const fs::path& out, const std::string& model = "cibs") {
  json j = {{"model", model},
            {"dataset_root", dataset.string()},
            {"output_dir", out.string()},
            {"ibs", {{"working_resolution", nullptr}}}};
  if (model == "nnibs") j["ibs"]["similarity"] = {{"map_path", "attention/{trial_id}.fgrid"}};
  return j;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct Prepared {
  TempDir dir{"pipe"};
  fs::path raw = dir / "raw";
  fs::path pre = dir / "pre";

  explicit Prepared(fixture::Options opt = {}) {
    fixture::write_dataset(raw, opt);
    cmd_preprocess(raw, pre);
  }
};

}  // namespace

TEST(Preprocess, DropsTheTrivialTrial) {
  TempDir dir("pre");
  fixture::Options opt;
  opt.trials = 4;
  opt.trivial = 1;
  opt.unsuccessful_one = false;
  fixture::write_dataset(dir / "raw", opt);
  std::ostringstream log;
  const auto sum = cmd_preprocess(dir / "raw", dir / "out", &log);
  EXPECT_EQ(sum.trials_kept, 4u);
  EXPECT_EQ(load_dataset(dir / "out").trials.size(), 4u);
  const auto rejects = parse_reject_log(read_text(dir / "out/rejects.jsonl"));
  ASSERT_EQ(rejects.size(), 1u);
  EXPECT_EQ(rejects[0].trial_id, "t4");
  EXPECT_NE(log.str().find("trials kept 4, dropped 1"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out/manifest.json"));
}

TEST(Preprocess, CountsMatchRejectLogPartition) {
  TempDir dir("pre");
  fixture::Options opt;
  opt.trials = 6;
  opt.trivial = 2;
  fixture::write_dataset(dir / "raw", opt);
  const auto sum = cmd_preprocess(dir / "raw", dir / "out");
  std::size_t with_source = 0, without = 0;
  for (const auto& r : parse_reject_log(read_text(dir / "out/rejects.jsonl"))) r.source_id ? ++with_source : ++without;
  EXPECT_EQ(sum.trials_dropped, without);
  EXPECT_EQ(sum.scanpaths_dropped, with_source);
  EXPECT_EQ(sum.trials_in, sum.trials_kept + sum.trials_dropped);
  EXPECT_EQ(sum.scanpaths_in, sum.scanpaths_kept + sum.scanpaths_dropped);
  EXPECT_EQ(sum.trials_in, 8u);
  EXPECT_EQ(sum.scanpaths_in, 18u);  // scanpaths of dropped trials are not counted
}

TEST(Preprocess, IsIdempotent) {
  TempDir dir("pre");
  fixture::write_dataset(dir / "raw");
  cmd_preprocess(dir / "raw", dir / "a");
  const auto again = cmd_preprocess(dir / "a", dir / "b");
  EXPECT_TRUE(again.rejects.empty());
  EXPECT_EQ(read_text(dir / "a/trials.json"), read_text(dir / "b/trials.json"));
  EXPECT_EQ(read_text(dir / "a/dataset.json"), read_text(dir / "b/dataset.json"));
  // References still resolve from the new location.
  const auto ds = load_dataset(dir / "b");
  for (const auto& t : ds.trials) EXPECT_TRUE(fs::exists(ds.resolve(t.image_ref)));
}

TEST(RunConfigParsing, ModelBlocksAndKinds) {
  const fs::path base = "/base";
  json j = {{"model", "sibs"}, {"dataset_root", "ds"}, {"output_dir", "out"}, {"ibs", json::object()}};
  auto c = run_config_from_json(j, base);
  EXPECT_EQ(c.dataset_root, fs::path("/base/ds"));
  EXPECT_EQ(c.ibs->similarity.kind, SimilarityKind::ssim);
  j["greedy"] = {{"attention", {{"kind", "ssim"}}}};
  EXPECT_THROW(run_config_from_json(j, base), Error);
  j.erase("greedy");
  j["ibs"]["similarity"] = {{"kind", "cross_correlation"}};
  EXPECT_THROW(run_config_from_json(j, base), Error);
  j["model"] = "nnibs";
  j["ibs"] = json::object();
  EXPECT_THROW(run_config_from_json(j, base), Error);  // external map needs a path
  j["model"] = "bogus";
  EXPECT_THROW(run_config_from_json(j, base), Error);
}

TEST(RunConfigParsing, CanonicalFormIsStable) {
  const json j = {{"model", "greedy"},
                  {"dataset_root", "ds"},
                  {"output_dir", "out"},
                  {"greedy", {{"attention", {{"kind", "external_map"}, {"map_path", "m/{trial_id}.fgrid"}}}}}};
  const auto c = run_config_from_json(j);
  json again = to_json(c);
  again["dataset_root"] = "ds";
  again["output_dir"] = "out";
  EXPECT_EQ(to_json(run_config_from_json(again)), to_json(c));
  EXPECT_EQ(c.greedy->patch_mode, PatchMode::double_target_size);
}

TEST(Subset, DeterministicSizedAndOrdered) {
  std::vector<Trial> trials;
  for (int i = 0; i < 20; ++i) trials.push_back(Trial{"t" + std::to_string(i), "", "", {}, "", {}, {}});
  const auto a = select_subset(trials, {5, 42}), b = select_subset(trials, {5, 42}), c = select_subset(trials, {5, 43});
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](const Trial& x, const Trial& y) { return x.trial_id < y.trial_id; }));
  EXPECT_EQ(select_subset(trials, {50, 1}).size(), 20u);
}

TEST(Run, CrossCorrelationSearcherWritesScanpathsAndManifest) {
  Prepared p;
  const auto cfg = run_config_from_json(ibs_config_json(p.pre, p.dir / "run"));
  const auto sum = cmd_run(cfg, 2);
  EXPECT_EQ(sum.exit_code, kExitOk);
  const auto paths = load_scanpaths(p.dir / "run/scanpaths.json");
  ASSERT_EQ(paths.size(), load_dataset(p.pre).trials.size());
  for (const auto& ts : paths) EXPECT_EQ(ts.scanpath.source_id, "cibs");
  const json manifest = json::parse(read_text(p.dir / "run/manifest.json"));
  EXPECT_EQ(manifest["config_sha256"], sha256_hex(to_json(cfg).dump()));
  EXPECT_EQ(manifest["trials_succeeded"], paths.size());
}

TEST(Run, ExternalModelIsRetruncated) {
  Prepared p;
  const auto ds = load_dataset(p.pre);
  std::vector<TrialScanpath> ext;
  for (const auto& t : ds.trials) {
    Scanpath s;
    s.source_id = "ext";
    s.max_fixations = 6;
    const auto& b = t.target_bbox;
    s.fixations = {t.initial_fixation, {b.center_x(), b.center_y()}, {5000, -5}};
    ext.push_back({t.trial_id, s});
  }
  save_scanpaths(ext, p.dir / "ext.json");
  json j = {{"model", "external"},
            {"dataset_root", p.pre.string()},
            {"output_dir", (p.dir / "run").string()},
            {"external_scanpaths", (p.dir / "ext.json").string()}};
  EXPECT_EQ(cmd_run(run_config_from_json(j)).exit_code, kExitOk);
  for (const auto& ts : load_scanpaths(p.dir / "run/scanpaths.json")) {
    EXPECT_EQ(ts.scanpath.fixations.size(), 2u);
    EXPECT_TRUE(ts.scanpath.target_found);
  }
}

TEST(Run, MissingAttentionMapSkipsOnlyThatTrial) {
  Prepared p;
  fs::remove(p.raw / "attention/t2.fgrid");
  // Maps stay under the raw dataset; point the config there.
  json j = ibs_config_json(p.pre, p.dir / "run", "nnibs");
  j["ibs"]["similarity"]["map_path"] = (p.raw / "attention/{trial_id}.fgrid").string();
  std::ostringstream log;
  const auto sum = cmd_run(run_config_from_json(j), 1, &log);
  EXPECT_EQ(sum.exit_code, kExitPartial);
  ASSERT_EQ(sum.skipped.size(), 1u);
  EXPECT_EQ(sum.skipped[0].trial_id, "t2");
  EXPECT_NE(sum.skipped[0].reason.find("t2.fgrid"), std::string::npos);
  EXPECT_EQ(load_scanpaths(p.dir / "run/scanpaths.json").size(), sum.trials - 1);
  EXPECT_NE(log.str().find("skipped t2"), std::string::npos);
}

TEST(Run, AllTrialsFailingIsFatal) {
  Prepared p;
  json j = ibs_config_json(p.pre, p.dir / "run", "nnibs");
  EXPECT_EQ(cmd_run(run_config_from_json(j)).exit_code, kExitFatal);
}

TEST(Run, ByteIdenticalAcrossRepeatsAndWorkerCounts) {
  Prepared p;
  for (const std::string model : {"cibs", "greedy"}) {
    json j = ibs_config_json(p.pre, p.dir / "a", model);
    if (model == "greedy") {
      j.erase("ibs");
      j["greedy"] = {{"attention", {{"kind", "external_map"}, {"map_path", (p.raw / "attention/{trial_id}.fgrid").string()}}}};
    } else {
      j["ibs"]["response_noise"] = 0.2;
      j["ibs"]["seed"] = 17;
    }
    cmd_run(run_config_from_json(j), 1);
    j["output_dir"] = (p.dir / "b").string();
    cmd_run(run_config_from_json(j), 3);
    for (const char* f : {"scanpaths.json", "manifest.json"})
      EXPECT_EQ(read_text(p.dir / "a" / f), read_text(p.dir / "b" / f)) << model << " " << f;
  }
}

TEST(Report, HumansOnly) {
  Prepared p;
  const auto rep = cmd_report(p.pre, {}, p.dir / "rep");
  EXPECT_TRUE(rep.models.empty());
  EXPECT_TRUE(rep.human_auc);
  EXPECT_TRUE(rep.mean_wh);
  EXPECT_EQ(read_text(p.dir / "rep/curves.csv").substr(0, 9), "n,humans\n");
  for (const char* f : {"metrics.json", "mm_trials.csv", "mm_pairs.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(p.dir / "rep" / f));
}

TEST(Report, CopiedSubjectMatchesItsWithinHumanContribution) {
  Prepared p;
  const auto ds = load_dataset(p.pre);
  std::vector<TrialScanpath> copy;
  for (const auto& t : ds.trials)
    for (const auto& s : t.human_scanpaths)
      if (s.source_id == "s1") copy.push_back({t.trial_id, s});
  save_scanpaths(copy, p.dir / "s1.json");
  const auto rep = build_report(p.pre, {p.dir / "s1.json"});
  ASSERT_EQ(rep.models.size(), 1u);
  int checked = 0;
  for (const auto& t : ds.trials) {
    std::vector<MultiMatchScore> involving;
    for (const auto& pr : rep.pair_records)
      if (pr.trial_id == t.trial_id && pr.model == "humans" && (pr.pair.a == "s1" || pr.pair.b == "s1"))
        involving.push_back(pr.pair.score);
    const auto rec = std::find_if(rep.trial_records.begin(), rep.trial_records.end(),
                                  [&](const TrialMmRecord& r) { return r.trial_id == t.trial_id && r.model == "s1"; });
    ASSERT_NE(rec, rep.trial_records.end());
    if (involving.empty()) {
      EXPECT_FALSE(rec->hm);
      continue;
    }
    ASSERT_TRUE(rec->hm);
    EXPECT_EQ(*rec->hm, mean_score(involving));
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Report, TwoModelFilesGiveTwoCurveColumns) {
  Prepared p;
  json j = ibs_config_json(p.pre, p.dir / "cibs");
  cmd_run(run_config_from_json(j));
  j = {{"model", "greedy"},
       {"dataset_root", p.pre.string()},
       {"output_dir", (p.dir / "greedy").string()},
       {"greedy", {{"attention", {{"kind", "external_map"}, {"map_path", (p.raw / "attention/{trial_id}.fgrid").string()}}}}}};
  cmd_run(run_config_from_json(j));
  cmd_report(p.pre, {p.dir / "cibs/scanpaths.json", p.dir / "greedy/scanpaths.json"}, p.dir / "rep");
  const auto csv = read_text(p.dir / "rep/curves.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,humans,cibs,greedy");
  EXPECT_EQ(line_count(csv), 7u);
}

TEST(Report, UnknownTrialIsAWarning) {
  Prepared p;
  Scanpath s;
  s.source_id = "m";
  s.fixations = {{1, 1}, {2, 2}};
  save_scanpaths({{"nope", s}}, p.dir / "m.json");
  const auto rep = build_report(p.pre, {p.dir / "m.json"});
  ASSERT_FALSE(rep.warnings.empty());
  EXPECT_NE(rep.warnings[0].find("unknown trial_id nope"), std::string::npos);
}

TEST(Validate, DatasetMapAndScanpaths) {
  Prepared p;
  EXPECT_TRUE(cmd_validate(p.pre).ok);
  EXPECT_TRUE(cmd_validate(p.raw / "attention/t0.fgrid").ok);
  write_text(p.dir / "bad.fgrid", "FGRID v1 2 2\nxx");
  const auto bad = cmd_validate(p.dir / "bad.fgrid");
  EXPECT_FALSE(bad.ok);
  EXPECT_NE(bad.messages[0].find("byte"), std::string::npos);
  Scanpath s;
  s.source_id = "m";
  s.fixations = {{1, 1}, {2, 2}, {3, 3}};
  s.max_fixations = 1;
  save_scanpaths({{"t0", s}}, p.dir / "sp.json");
  EXPECT_FALSE(cmd_validate(p.dir / "sp.json").ok);
  fs::remove(p.raw / "images/t1.pgm");
  EXPECT_FALSE(cmd_validate(p.raw).ok);
}

#ifdef VSEARCH_CLI
TEST(Cli, SubcommandsAndExitCodes) {
  Prepared p;
  const std::string cli = VSEARCH_CLI;
  auto run = [&](const std::string& args) {
    const int rc = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(run("validate " + p.pre.string()), 0);
  write_text(p.dir / "bad.fgrid", "nope");
  EXPECT_EQ(run("validate " + (p.dir / "bad.fgrid").string()), 1);
  write_text(p.dir / "cfg.json", ibs_config_json("pre", "run").dump());
  EXPECT_EQ(run("run --config " + (p.dir / "cfg.json").string() + " --jobs 2 --seed 3 --subset 2"), 0);
  const json manifest = json::parse(read_text(p.dir / "run/manifest.json"));
  EXPECT_EQ(manifest["trials_total"], 2);
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(run("report " + p.pre.string() + " " + (p.dir / "run/scanpaths.json").string() + " --out " +
                (p.dir / "rep").string() + " --correlation spearman --simplify"),
            0);
  EXPECT_TRUE(fs::exists(p.dir / "rep/metrics.json"));
  EXPECT_NE(run("run"), 0);
  EXPECT_NE(run("report " + p.pre.string() + " --out x --correlation kendall"), 0);
}
#endif
