#pragma once

// Batch orchestration behind the command-line tool: preprocess a dataset, run
// a searcher over it, score scanpath files. Every output is a deterministic
// function of the inputs and the run configuration; worker count never
// changes a byte.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "vsearch/core.hpp"
#include "vsearch/dataset_io.hpp"
#include "vsearch/greedy.hpp"
#include "vsearch/ibs.hpp"
#include "vsearch/metrics.hpp"
#include "vsearch/preprocess.hpp"
#include "vsearch/similarity.hpp"

namespace vsearch {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitFatal = 1, kExitPartial = 2 };

// ---------------------------------------------------------------------------
// Worker pool

/// Calls fn(i) for i in [0, n) on `jobs` threads. Each index is processed
/// exactly once; callers write results into slot i.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), std::max<std::size_t>(1, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Run configuration

enum class ModelKind { cibs, sibs, nnibs, greedy, external };

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "cibs") return ModelKind::cibs;
  if (s == "sibs") return ModelKind::sibs;
  if (s == "nnibs") return ModelKind::nnibs;
  if (s == "greedy") return ModelKind::greedy;
  if (s == "external") return ModelKind::external;
  throw Error("unknown model '" + s + "' (expected cibs, sibs, nnibs, greedy or external)");
}

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::cibs: return "cibs";
    case ModelKind::sibs: return "sibs";
    case ModelKind::nnibs: return "nnibs";
    case ModelKind::greedy: return "greedy";
    case ModelKind::external: return "external";
  }
  return "?";
}

inline bool is_ibs(ModelKind m) { return m == ModelKind::cibs || m == ModelKind::sibs || m == ModelKind::nnibs; }

struct SubsetSpec {
  int n = 0;
  std::uint64_t seed = 0;
};

struct RunConfig {
  fs::path dataset_root;
  ModelKind model = ModelKind::cibs;
  std::optional<IbsConfig> ibs;
  std::optional<GreedyConfig> greedy;
  fs::path external_scanpaths;
  fs::path output_dir;
  std::optional<SubsetSpec> subset;
  fs::path cache_dir;  // defaults to <output_dir>/cache
};

namespace detail {

inline const char* to_string(PriorKind k) {
  switch (k) {
    case PriorKind::uniform: return "uniform";
    case PriorKind::center_gaussian: return "center_gaussian";
    case PriorKind::external_map: return "external_map";
  }
  return "?";
}

inline const char* to_string(PatchMode m) {
  switch (m) {
    case PatchMode::fovea: return "fovea";
    case PatchMode::target_size: return "target_size";
    case PatchMode::double_target_size: return "double_target_size";
  }
  return "?";
}

inline SimilaritySource similarity_from_json(const json& j) {
  SimilaritySource s;
  s.kind = similarity_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("map_path")) s.map_path = j.at("map_path").get<std::string>();
  return s;
}

inline json to_json(const SimilaritySource& s) {
  json j = {{"kind", vsearch::to_string(s.kind)}};
  if (!s.map_path.empty()) j["map_path"] = s.map_path;
  return j;
}

}  // namespace detail

inline IbsConfig ibs_config_from_json(const json& j, ModelKind model) {
  IbsConfig c;
  const SimilarityKind expected = model == ModelKind::cibs   ? SimilarityKind::cross_correlation
                                  : model == ModelKind::sibs ? SimilarityKind::ssim
                                                             : SimilarityKind::external_map;
  if (j.contains("similarity")) {
    const auto& s = j.at("similarity");
    if (s.contains("kind") && similarity_kind_from_string(s.at("kind").get<std::string>()) != expected)
      throw Error(std::string("ibs.similarity.kind conflicts with model ") + to_string(model));
    if (s.contains("map_path")) c.similarity.map_path = s.at("map_path").get<std::string>();
  }
  c.similarity.kind = expected;
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    const std::string kind = p.at("kind").get<std::string>();
    if (kind == "uniform") {
      c.prior = PriorSpec::uniform();
    } else if (kind == "center_gaussian") {
      c.prior = PriorSpec::center_gaussian(p.value("sigma_frac", 0.25));
    } else if (kind == "external_map") {
      c.prior = PriorSpec::external(p.at("map_path").get<std::string>());
    } else {
      throw Error("unknown prior kind '" + kind + "'");
    }
  }
  c.visibility_sigma = j.value("visibility_sigma", c.visibility_sigma);
  c.visibility_peak = j.value("visibility_peak", c.visibility_peak);
  const std::string rule = j.value("selection_rule", std::string("ideal"));
  if (rule == "ideal")
    c.selection_rule = SelectionRule::ideal;
  else if (rule == "map_greedy")
    c.selection_rule = SelectionRule::map_greedy;
  else
    throw Error("unknown selection_rule '" + rule + "'");
  c.response_noise = j.value("response_noise", c.response_noise);
  c.seed = j.value("seed", c.seed);
  if (j.contains("working_resolution")) {
    const auto& w = j.at("working_resolution");
    if (w.is_null())
      c.working.reset();
    else
      c.working = Dims{w.at(0).get<int>(), w.at(1).get<int>()};
  }
  c.validate();
  return c;
}

inline json to_json(const IbsConfig& c) {
  json prior = {{"kind", detail::to_string(c.prior.kind)}};
  if (c.prior.kind == PriorKind::center_gaussian) prior["sigma_frac"] = c.prior.sigma_frac;
  if (c.prior.kind == PriorKind::external_map) prior["map_path"] = c.prior.map_path;
  return {{"similarity", detail::to_json(c.similarity)},
          {"prior", prior},
          {"visibility_sigma", c.visibility_sigma},
          {"visibility_peak", c.visibility_peak},
          {"selection_rule", c.selection_rule == SelectionRule::ideal ? "ideal" : "map_greedy"},
          {"response_noise", c.response_noise},
          {"seed", c.seed},
          {"working_resolution", c.working ? json::array({c.working->height, c.working->width}) : json(nullptr)}};
}

inline GreedyConfig greedy_config_from_json(const json& j) {
  GreedyConfig g;
  g.attention = detail::similarity_from_json(j.at("attention"));
  g.attention.validate();
  g.patch_mode = patch_mode_from_string(j.value("patch_mode", std::string("double_target_size")));
  g.max_fixations = j.value("max_fixations", 0);
  if (g.max_fixations < 0) throw Error("greedy.max_fixations must be >= 0");
  return g;
}

inline json to_json(const GreedyConfig& g) {
  return {{"attention", detail::to_json(g.attention)},
          {"patch_mode", detail::to_string(g.patch_mode)},
          {"max_fixations", g.max_fixations}};
}

/// Parses a run configuration. Relative paths resolve against `base_dir`
/// (normally the directory holding the config file).
inline RunConfig run_config_from_json(const json& j, const fs::path& base_dir = {}) {
  auto path_of = [&](const std::string& key) {
    const fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  RunConfig c;
  c.model = model_kind_from_string(j.at("model").get<std::string>());
  c.dataset_root = path_of("dataset_root");
  c.output_dir = path_of("output_dir");
  if (j.contains("cache_dir")) c.cache_dir = path_of("cache_dir");

  const bool has_ibs = j.contains("ibs"), has_greedy = j.contains("greedy"),
             has_external = j.contains("external_scanpaths");
  const bool want_ibs = is_ibs(c.model), want_greedy = c.model == ModelKind::greedy,
             want_external = c.model == ModelKind::external;
  if (has_ibs != want_ibs || has_greedy != want_greedy || has_external != want_external)
    throw Error(std::string("model ") + to_string(c.model) +
                " requires exactly its own config block (ibs, greedy or external_scanpaths)");
  if (has_ibs) c.ibs = ibs_config_from_json(j.at("ibs"), c.model);
  if (has_greedy) c.greedy = greedy_config_from_json(j.at("greedy"));
  if (has_external) c.external_scanpaths = path_of("external_scanpaths");
  if (j.contains("subset")) {
    const auto& s = j.at("subset");
    c.subset = SubsetSpec{s.at("n").get<int>(), s.value("seed", std::uint64_t{0})};
    if (c.subset->n <= 0) throw Error("subset.n must be positive");
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(json::parse(read_text(path)), path.parent_path());
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

/// Canonical JSON form of the effective configuration (used for hashing).
inline json to_json(const RunConfig& c) {
  json j = {{"model", to_string(c.model)}};
  if (c.ibs) j["ibs"] = to_json(*c.ibs);
  if (c.greedy) j["greedy"] = to_json(*c.greedy);
  if (c.subset) j["subset"] = {{"n", c.subset->n}, {"seed", c.subset->seed}};
  return j;
}

/// Deterministic random subset: the n trials with the smallest seeded keys,
/// returned in trial_id order.
inline std::vector<Trial> select_subset(std::vector<Trial> trials, const SubsetSpec& s) {
  std::sort(trials.begin(), trials.end(), [&](const Trial& a, const Trial& b) {
    const auto ka = splitmix64(s.seed ^ stable_hash(a.trial_id)), kb = splitmix64(s.seed ^ stable_hash(b.trial_id));
    return ka != kb ? ka < kb : a.trial_id < b.trial_id;
  });
  if (static_cast<std::size_t>(s.n) < trials.size()) trials.resize(s.n);
  std::sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) { return a.trial_id < b.trial_id; });
  return trials;
}

inline void sort_by_id(std::vector<Trial>& trials) {
  std::sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) { return a.trial_id < b.trial_id; });
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessSummary {
  std::size_t trials_in = 0, trials_kept = 0, trials_dropped = 0;
  std::size_t scanpaths_in = 0, scanpaths_kept = 0, scanpaths_dropped = 0;
  RejectLog rejects;
};

/// Rewrites dataset-relative file references so they resolve from `new_root`.
inline std::string rebase_ref(const std::string& ref, const fs::path& old_root, const fs::path& new_root) {
  if (ref.empty() || fs::path(ref).is_absolute()) return ref;
  const fs::path target = fs::weakly_canonical(fs::absolute(old_root / ref));
  return target.lexically_relative(fs::weakly_canonical(fs::absolute(new_root))).generic_string();
}

inline PreprocessSummary cmd_preprocess(const fs::path& root, const fs::path& out, std::ostream* log = nullptr) {
  LoadedDataset ds = load_dataset(root);
  PreprocessSummary sum;
  sum.rejects = ds.rejects;
  sum.trials_in = ds.trials.size();
  for (const auto& r : ds.rejects) r.source_id ? ++sum.scanpaths_dropped : ++sum.trials_dropped;
  for (const auto& t : ds.trials) sum.scanpaths_in += t.human_scanpaths.size();
  sum.trials_in += sum.trials_dropped;
  sum.scanpaths_in += sum.scanpaths_dropped;

  sort_by_id(ds.trials);
  EqualizeResult eq = equalize(ds.trials, ds.spec);
  sum.rejects.insert(sum.rejects.end(), eq.rejects.begin(), eq.rejects.end());
  sum.trials_kept = eq.trials.size();
  sum.trials_dropped += eq.trials_dropped();
  sum.scanpaths_kept = eq.scanpaths_kept();
  sum.scanpaths_dropped += eq.scanpaths_dropped();

  fs::create_directories(out);
  for (auto& t : eq.trials) {
    t.image_ref = rebase_ref(t.image_ref, root, out);
    t.target_template_ref = rebase_ref(t.target_template_ref, root, out);
  }
  save_dataset(ds.spec, eq.trials, out);
  write_text(out / "rejects.jsonl", reject_log_jsonl(sum.rejects));
  const json manifest = {{"tool", "vsearch"},
                         {"version", kToolVersion},
                         {"command", "preprocess"},
                         {"dataset", ds.spec.name},
                         {"trials_kept", sum.trials_kept},
                         {"trials_dropped", sum.trials_dropped},
                         {"scanpaths_kept", sum.scanpaths_kept},
                         {"scanpaths_dropped", sum.scanpaths_dropped}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  if (log)
    *log << "trials kept " << sum.trials_kept << ", dropped " << sum.trials_dropped << "; scanpaths kept "
         << sum.scanpaths_kept << ", dropped " << sum.scanpaths_dropped << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// run

struct RunSummary {
  std::size_t trials = 0;
  std::size_t succeeded = 0;
  std::vector<RejectEntry> skipped;
  int exit_code = kExitOk;
};

inline RunSummary cmd_run(const RunConfig& cfg, int jobs = 1, std::ostream* log = nullptr) {
  LoadedDataset ds = load_dataset(cfg.dataset_root);
  if (log)
    for (const auto& r : ds.rejects)
      *log << "warning: dataset record " << r.trial_id << " rejected: " << r.reason << "\n";
  sort_by_id(ds.trials);
  const auto mean_target = ds.trials.empty() ? std::pair<double, double>{1, 1} : mean_target_size(ds.trials);
  std::vector<Trial> trials = cfg.subset ? select_subset(ds.trials, *cfg.subset) : ds.trials;
  const fs::path cache_dir = cfg.cache_dir.empty() ? cfg.output_dir / "cache" : cfg.cache_dir;

  std::map<std::string, Scanpath> external;
  if (cfg.model == ModelKind::external) {
    for (auto& ts : load_scanpaths(cfg.external_scanpaths)) {
      if (!external.emplace(ts.trial_id, std::move(ts.scanpath)).second && log)
        *log << "warning: duplicate external scanpath for " << ts.trial_id << "; keeping the first\n";
    }
  }

  std::vector<std::optional<Scanpath>> results(trials.size());
  std::vector<std::string> errors(trials.size());
  const std::string model_name = to_string(cfg.model);
  parallel_for(trials.size(), jobs, [&](std::size_t i) {
    const Trial& t = trials[i];
    try {
      switch (cfg.model) {
        case ModelKind::cibs:
        case ModelKind::sibs:
        case ModelKind::nnibs:
          results[i] = run_search(t, *cfg.ibs, ds.spec, ds.root, cache_dir, model_name);
          break;
        case ModelKind::greedy:
          results[i] = run_greedy(t, *cfg.greedy, ds.spec, mean_target, SimilarityContext{ds.root, std::nullopt, cache_dir},
                                  model_name);
          break;
        case ModelKind::external: {
          const auto it = external.find(t.trial_id);
          if (it == external.end()) throw Error("no external scanpath for this trial");
          Scanpath s = it->second;
          for (auto& f : s.fixations) f = clamp_to_image(f, ds.spec.image_height, ds.spec.image_width);
          results[i] = truncate_at_target(s, t.target_bbox, FoundPredicate::grid(ds.spec));
          break;
        }
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  RunSummary sum;
  sum.trials = trials.size();
  std::vector<TrialScanpath> out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (results[i]) {
      out.push_back({trials[i].trial_id, *results[i]});
    } else {
      sum.skipped.push_back({trials[i].trial_id, std::nullopt, errors[i]});
      if (log) *log << "skipped " << trials[i].trial_id << ": " << errors[i] << "\n";
    }
  }
  sum.succeeded = out.size();
  if (cfg.model == ModelKind::external && log)
    for (const auto& [id, _] : external)
      if (std::none_of(trials.begin(), trials.end(), [&](const Trial& t) { return t.trial_id == id; }))
        *log << "warning: external scanpath for unknown or unselected trial " << id << "\n";

  fs::create_directories(cfg.output_dir);
  save_scanpaths(out, cfg.output_dir / "scanpaths.json");
  json skipped = json::array();
  for (const auto& s : sum.skipped) skipped.push_back({{"trial_id", s.trial_id}, {"reason", s.reason}});
  const json effective = to_json(cfg);
  const json manifest = {{"tool", "vsearch"},
                         {"version", kToolVersion},
                         {"command", "run"},
                         {"model", model_name},
                         {"dataset", ds.spec.name},
                         {"config", effective},
                         {"config_sha256", sha256_hex(effective.dump())},
                         {"seed", cfg.ibs ? cfg.ibs->seed : 0},
                         {"trials_total", sum.trials},
                         {"trials_succeeded", sum.succeeded},
                         {"skipped", skipped},
                         {"outputs", {"scanpaths.json"}}};
  write_text(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
  if (sum.trials > 0 && sum.succeeded == 0)
    sum.exit_code = kExitFatal;
  else if (!sum.skipped.empty())
    sum.exit_code = kExitPartial;
  if (log) *log << model_name << ": " << sum.succeeded << "/" << sum.trials << " trials\n";
  return sum;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  MmEligibility eligibility;
  MultiMatchOptions multimatch;
  CorrelationKind correlation = CorrelationKind::pearson;
};

struct TrialMmRecord {
  std::string trial_id;
  std::string model;  // "humans" for the within-human baseline row
  std::optional<MultiMatchScore> hm;
  std::optional<MultiMatchScore> wh;
  bool found = false;
  int n_saccades = 0;
};

struct PairRecord {
  std::string trial_id;
  std::string model;  // "humans" for human-human pairs
  PairScore pair;
};

struct ModelReport {
  std::string name;
  std::string file;
  CumulativeCurve curve;
  double auc = 0.0;
  std::optional<MultiMatchScore> mean_hm;
  std::optional<double> correlation;
  std::size_t scanpaths = 0;
};

struct Report {
  std::string dataset;
  int n_max = 0;
  std::map<std::string, CumulativeCurve> subject_curves;
  std::map<std::string, double> subject_auc;
  std::vector<double> human_mean_curve;
  std::optional<double> human_auc;
  std::optional<MultiMatchScore> mean_wh;
  std::vector<ModelReport> models;
  std::vector<TrialMmRecord> trial_records;
  std::vector<PairRecord> pair_records;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline json score_json(const std::optional<MultiMatchScore>& s) {
  if (!s) return nullptr;
  return {{"shape", s->shape}, {"direction", s->direction}, {"length", s->length}, {"position", s->position},
          {"avg", s->avg()}};
}

inline std::string score_csv(const std::optional<MultiMatchScore>& s) {
  if (!s) return ",,,";
  return num(s->shape) + "," + num(s->direction) + "," + num(s->length) + "," + num(s->position);
}

inline std::optional<MultiMatchScore> mean_of(const std::vector<MultiMatchScore>& v) {
  if (v.empty()) return std::nullopt;
  return mean_score(v);
}

}  // namespace detail

/// Scores humans and every scanpath file against one dataset. Human
/// scanpaths are re-truncated with the common criterion; unsuccessful ones
/// count towards the cumulative curves but never enter Multi-Match.
inline Report build_report(const fs::path& dataset_root, const std::vector<fs::path>& files,
                           const ReportOptions& opts = {}) {
  LoadedDataset ds = load_dataset(dataset_root);
  sort_by_id(ds.trials);
  Report rep;
  rep.dataset = ds.spec.name;
  rep.n_max = std::max(2, ds.spec.max_fixations);
  const double width = ds.spec.image_width, height = ds.spec.image_height;
  const auto pred = FoundPredicate::grid(ds.spec);

  std::map<std::string, std::vector<Scanpath>> humans_by_trial;
  std::map<std::string, std::vector<Scanpath>> by_subject;
  for (const auto& t : ds.trials) {
    auto& hs = humans_by_trial[t.trial_id];
    for (auto s : t.human_scanpaths) {
      for (auto& f : s.fixations) f = clamp_to_image(f, ds.spec.image_height, ds.spec.image_width);
      s = truncate_at_target(s, t.target_bbox, pred);
      hs.push_back(s);
      by_subject[s.source_id].push_back(s);
    }
  }
  rep.human_mean_curve.assign(rep.n_max, 0.0);
  for (const auto& [subject, paths] : by_subject) {
    const auto curve = cumulative_curve(paths, rep.n_max);
    rep.subject_curves[subject] = curve;
    rep.subject_auc[subject] = auc(curve);
    for (int n = 0; n < rep.n_max; ++n) rep.human_mean_curve[n] += curve.values[n] / by_subject.size();
  }
  if (!rep.subject_auc.empty()) {
    double s = 0;
    for (const auto& [_, a] : rep.subject_auc) s += a;
    rep.human_auc = s / rep.subject_auc.size();
  }

  // Within-human baseline per trial.
  std::map<std::string, std::optional<MultiMatchScore>> wh_by_trial;
  std::vector<MultiMatchScore> wh_all;
  for (const auto& t : ds.trials) {
    const auto res = wh_hm_mm(humans_by_trial[t.trial_id], nullptr, width, height, opts.eligibility, opts.multimatch);
    wh_by_trial[t.trial_id] = res.wh;
    if (res.wh) wh_all.push_back(*res.wh);
    for (const auto& p : res.human_pairs) rep.pair_records.push_back({t.trial_id, "humans", p});
    rep.trial_records.push_back({t.trial_id, "humans", std::nullopt, res.wh, true, 0});
  }
  rep.mean_wh = detail::mean_of(wh_all);

  std::set<std::string> names;
  for (const auto& file : files) {
    auto paths = load_scanpaths(file);
    ModelReport m;
    m.file = file.filename().string();
    m.name = paths.empty() || paths.front().scanpath.source_id.empty() ? file.stem().string()
                                                                      : paths.front().scanpath.source_id;
    for (int k = 2; names.contains(m.name); ++k) m.name = m.name + "#" + std::to_string(k);
    names.insert(m.name);

    std::map<std::string, Scanpath> by_trial;
    for (auto& ts : paths) {
      if (!humans_by_trial.contains(ts.trial_id)) {
        rep.warnings.push_back(m.name + ": unknown trial_id " + ts.trial_id);
        continue;
      }
      if (!by_trial.emplace(ts.trial_id, std::move(ts.scanpath)).second)
        rep.warnings.push_back(m.name + ": duplicate scanpath for " + ts.trial_id);
    }
    std::vector<Scanpath> all;
    for (const auto& [_, s] : by_trial) all.push_back(s);
    m.scanpaths = all.size();
    if (all.empty()) {
      rep.warnings.push_back(m.name + ": no scanpaths for known trials");
      m.curve.values.assign(rep.n_max, 0.0);
    } else {
      m.curve = cumulative_curve(all, rep.n_max);
    }
    m.auc = auc(m.curve);

    std::vector<MultiMatchScore> hm_all;
    std::vector<XY> points;
    for (const auto& t : ds.trials) {
      const auto it = by_trial.find(t.trial_id);
      if (it == by_trial.end()) continue;
      const Scanpath& model = it->second;
      const auto res = wh_hm_mm(humans_by_trial[t.trial_id], &model, width, height, opts.eligibility, opts.multimatch);
      for (const auto& p : res.model_pairs) rep.pair_records.push_back({t.trial_id, m.name, p});
      rep.trial_records.push_back({t.trial_id, m.name, res.hm, wh_by_trial[t.trial_id], model.target_found,
                                   model.saccade_count()});
      if (res.hm) hm_all.push_back(*res.hm);
      if (res.hm && wh_by_trial[t.trial_id]) points.push_back({res.hm->avg(), wh_by_trial[t.trial_id]->avg()});
    }
    m.mean_hm = detail::mean_of(hm_all);
    if (points.size() >= 3) m.correlation = mm_correlation(points, opts.correlation);
    rep.models.push_back(std::move(m));
  }
  return rep;
}

inline json to_json(const Report& rep) {
  json j = {{"dataset", rep.dataset}, {"n_max", rep.n_max}};
  json humans = {{"auc", rep.human_auc ? json(*rep.human_auc) : json(nullptr)},
                 {"mean_curve", rep.human_mean_curve},
                 {"whMM", detail::score_json(rep.mean_wh)}};
  json subjects = json::object();
  for (const auto& [name, curve] : rep.subject_curves)
    subjects[name] = {{"auc", rep.subject_auc.at(name)}, {"curve", curve.values}};
  humans["subjects"] = subjects;
  j["humans"] = humans;
  json models = json::array();
  for (const auto& m : rep.models)
    models.push_back({{"name", m.name},
                      {"file", m.file},
                      {"scanpaths", m.scanpaths},
                      {"auc", m.auc},
                      {"curve", m.curve.values},
                      {"hmMM", detail::score_json(m.mean_hm)},
                      {"correlation", m.correlation ? json(*m.correlation) : json("n/a")}});
  j["models"] = models;
  json trials = json::array();
  for (const auto& r : rep.trial_records)
    trials.push_back({{"trial_id", r.trial_id},
                      {"model", r.model},
                      {"hmMM", detail::score_json(r.hm)},
                      {"whMM", detail::score_json(r.wh)},
                      {"found", r.found},
                      {"n_saccades", r.n_saccades}});
  j["trials"] = trials;
  j["warnings"] = rep.warnings;
  return j;
}

inline std::string curves_csv(const Report& rep) {
  std::string out = "n,humans";
  for (const auto& m : rep.models) out += "," + m.name;
  out += "\n";
  for (int n = 0; n < rep.n_max; ++n) {
    out += std::to_string(n + 1) + "," + detail::num(rep.human_mean_curve[n]);
    for (const auto& m : rep.models) out += "," + detail::num(m.curve.values[n]);
    out += "\n";
  }
  return out;
}

inline std::string trials_csv(const Report& rep) {
  std::string out =
      "trial_id,model,hmMM_avg,whMM_avg,found,n_saccades,hm_shape,hm_direction,hm_length,hm_position,"
      "wh_shape,wh_direction,wh_length,wh_position\n";
  for (const auto& r : rep.trial_records) {
    out += r.trial_id + "," + r.model + "," + (r.hm ? detail::num(r.hm->avg()) : "") + "," +
           (r.wh ? detail::num(r.wh->avg()) : "") + "," + (r.found ? "1" : "0") + "," + std::to_string(r.n_saccades) +
           "," + detail::score_csv(r.hm) + "," + detail::score_csv(r.wh) + "\n";
  }
  return out;
}

inline std::string pairs_csv(const Report& rep) {
  std::string out = "trial_id,model,a,b,shape,direction,length,position,avg\n";
  for (const auto& p : rep.pair_records)
    out += p.trial_id + "," + p.model + "," + p.pair.a + "," + p.pair.b + "," +
           detail::score_csv(p.pair.score) + "," + detail::num(p.pair.score.avg()) + "\n";
  return out;
}

inline Report cmd_report(const fs::path& dataset_root, const std::vector<fs::path>& files, const fs::path& out,
                         const ReportOptions& opts = {}, std::ostream* log = nullptr) {
  Report rep = build_report(dataset_root, files, opts);
  fs::create_directories(out);
  write_text(out / "metrics.json", to_json(rep).dump(2) + "\n");
  write_text(out / "curves.csv", curves_csv(rep));
  write_text(out / "mm_trials.csv", trials_csv(rep));
  write_text(out / "mm_pairs.csv", pairs_csv(rep));
  json inputs = json::array();
  for (const auto& f : files) inputs.push_back(f.filename().string());
  const json manifest = {{"tool", "vsearch"},
                         {"version", kToolVersion},
                         {"command", "report"},
                         {"dataset", rep.dataset},
                         {"inputs", inputs},
                         {"outputs", {"metrics.json", "curves.csv", "mm_trials.csv", "mm_pairs.csv"}}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  if (log) {
    for (const auto& w : rep.warnings) *log << "warning: " << w << "\n";
    if (rep.human_auc) *log << "humans: AUC " << detail::num(*rep.human_auc) << "\n";
    for (const auto& m : rep.models)
      *log << m.name << ": AUC " << detail::num(m.auc) << ", AvgMM "
           << (m.mean_hm ? detail::num(m.mean_hm->avg()) : std::string("n/a")) << ", corr "
           << (m.correlation ? detail::num(*m.correlation) : std::string("n/a")) << "\n";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// validate

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> messages;
};

/// Lints a dataset directory, an FGRID file or a scanpaths JSON file.
inline ValidationResult cmd_validate(const fs::path& path) {
  ValidationResult res;
  auto fail = [&](const std::string& m) {
    res.ok = false;
    res.messages.push_back(m);
  };
  try {
    if (fs::is_directory(path)) {
      const auto ds = load_dataset(path);
      for (const auto& r : ds.rejects)
        fail(r.trial_id + (r.source_id ? "/" + *r.source_id : std::string()) + ": " + r.reason);
      for (const auto& t : ds.trials) {
        if (!fs::exists(ds.resolve(t.image_ref))) fail(t.trial_id + ": missing image " + t.image_ref);
        if (t.has_template() && !fs::exists(ds.resolve(t.target_template_ref)))
          fail(t.trial_id + ": missing template " + t.target_template_ref);
      }
      res.messages.push_back(std::to_string(ds.trials.size()) + " valid trials");
    } else if (path.extension() == ".fgrid") {
      const auto g = read_fgrid(path);
      res.messages.push_back("FGRID " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()));
    } else {
      const auto paths = load_scanpaths(path);
      for (const auto& p : paths)
        if (auto problem = detail::scanpath_problem(p.scanpath)) fail(p.trial_id + ": " + *problem);
      res.messages.push_back(std::to_string(paths.size()) + " scanpaths");
    }
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return res;
}

}  // namespace vsearch
