#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardflow/cohort.hpp"
#include "wardflow/csv.hpp"
#include "wardflow/graph.hpp"
#include "wardflow/ingest.hpp"
#include "wardflow/metrics.hpp"
#include "wardflow/predict.hpp"
#include "wardflow/sha256.hpp"
#include "wardflow/stats.hpp"
#include "wardflow/types.hpp"

namespace wardflow::pipeline {

inline constexpr const char* kSpecVersion = "1.0";

struct RunConfig {
  std::string venues_path, transitions_path, wards_path, expenditure_path, imd_path;
  std::string out_dir = "out";
  double centre_lat = 51.5074;  // configurable city centre
  double centre_lon = -0.1278;
  int fiscal_offset = 1;
  std::vector<std::string> anova_variables = {"N", "IC", "OC", "IOR", "ACC", "VC", "VCD"};
  std::vector<ml::ClassifierKind> classifiers = {
      ml::ClassifierKind::naive_bayes, ml::ClassifierKind::logistic_regression,
      ml::ClassifierKind::decision_tree, ml::ClassifierKind::random_forest};
  int cv_folds = 10;
  std::optional<std::uint64_t> seed;  // required for the prediction stage
  std::vector<int> subset_thresholds = {0, 10, 20, 30, 40};
  DeprivationStatistic deprivation_stat = DeprivationStatistic::median_rank;
  ml::Hyperparams hyperparams;

  LatLon centre() const { return {centre_lat, centre_lon}; }
};

/// key = value lines, '#' comments. Unknown keys are an error so typos
/// don't silently run with defaults.
inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto split_list = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };
  auto need_double = [&](const std::string& s) {
    auto v = parse_double(s);
    if (!v) throw config_error("config: bad numeric value for " + key + ": " + s);
    return *v;
  };
  auto need_int = [&](const std::string& s) {
    auto v = parse_int(s);
    if (!v) throw config_error("config: bad integer value for " + key + ": " + s);
    return *v;
  };

  if (key == "venues") cfg.venues_path = value;
  else if (key == "transitions") cfg.transitions_path = value;
  else if (key == "wards") cfg.wards_path = value;
  else if (key == "expenditure") cfg.expenditure_path = value;
  else if (key == "imd") cfg.imd_path = value;
  else if (key == "out") cfg.out_dir = value;
  else if (key == "centre_lat") cfg.centre_lat = need_double(value);
  else if (key == "centre_lon") cfg.centre_lon = need_double(value);
  else if (key == "fiscal_offset") cfg.fiscal_offset = static_cast<int>(need_int(value));
  else if (key == "folds") cfg.cv_folds = static_cast<int>(need_int(value));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(need_int(value));
  else if (key == "anova_variables") cfg.anova_variables = split_list(value);
  else if (key == "thresholds") {
    cfg.subset_thresholds.clear();
    for (const auto& s : split_list(value))
      cfg.subset_thresholds.push_back(static_cast<int>(need_int(s)));
  } else if (key == "classifiers") {
    cfg.classifiers.clear();
    for (const auto& s : split_list(value)) {
      auto k = ml::parse_classifier_kind(s);
      if (!k) throw config_error("config: unknown classifier: " + s);
      cfg.classifiers.push_back(*k);
    }
  } else if (key == "deprivation_stat") {
    if (value == "median_rank") cfg.deprivation_stat = DeprivationStatistic::median_rank;
    else if (value == "mean_score") cfg.deprivation_stat = DeprivationStatistic::mean_score;
    else throw config_error("config: unknown deprivation_stat: " + value);
  } else {
    throw config_error("config: unknown key: " + key);
  }
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t\r");
      std::size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    apply_config_entry(cfg, key, value);
  }
}

struct LoadedInputs {
  VenueTable venues;
  TransitionLog log;
  WardTable wards;
  ExpenditureTable expenditure;
  ImdTable imd;
};

inline LoadedInputs load_inputs(const RunConfig& cfg) {
  LoadedInputs in;
  in.venues = parse_venues(cfg.venues_path);
  in.log = parse_transitions(cfg.transitions_path, in.venues);
  in.wards = load_wards_geojson(cfg.wards_path);
  in.expenditure = parse_expenditure(cfg.expenditure_path);
  in.imd = parse_imd(cfg.imd_path);
  return in;
}

/// The calendar years covered by the aligned fiscal years, ascending.
inline std::vector<int> aligned_years(const PeriodMap& pm) {
  std::vector<int> years;
  for (const auto& [f, y] : pm.entries) years.push_back(y);
  std::sort(years.begin(), years.end());
  return years;
}

// ---- artifact writers -------------------------------------------------------

inline void write_cohorts_csv(const std::string& path, const WardTable& wards,
                              const CohortAssignment& cohorts) {
  CsvWriter out(path);
  out.raw_line("ward_code,group");
  for (std::uint32_t w = 0; w < wards.size(); ++w)
    if (cohorts.group[w]) out.row({wards[w].ward_code, to_string(*cohorts.group[w])});
}

/// Fig-3-style scatter rows from the first period: area, CEA, CVA, initial
/// IMD score, and the quadrant relative to CEA=1 / CVA=1 (ties go low).
inline std::size_t write_scatter_csv(const std::string& path, const WardMetricsPanel& panel,
                                     const ImdTable& imd) {
  CsvWriter out(path);
  out.raw_line("area,CEA,CVA,imd_score,quadrant");
  std::size_t rows = 0;
  for (std::size_t w = 0; w < panel.ward_codes.size(); ++w) {
    const WardPeriodRow& r = panel.rows[0][w];
    const DeprivationRecord* rec = imd.find(2010, panel.ward_codes[w]);
    if (!r.cea || !r.cva || !rec) continue;
    std::string quadrant = std::string(*r.cea > 1.0 ? "high" : "low") + "-CEA/" +
                           (*r.cva > 1.0 ? "high" : "low") + "-CVA";
    out.row({panel.ward_codes[w], format_double(*r.cea), format_double(*r.cva),
             format_double(rec->score), quadrant});
    ++rows;
  }
  return rows;
}

struct GroupMeansTable {
  // variable -> group(1..4) -> year index -> mean (missing when group empty)
  std::map<std::string, std::array<std::vector<std::optional<double>>, 4>> group_means;
  // variable -> year index -> mean over all retained wards
  std::map<std::string, std::vector<std::optional<double>>> all_ward_means;
  // variable -> wards entering the computation (cohort assigned + complete series)
  std::map<std::string, std::size_t> retained;
};

/// Means per (group, variable, year) over wards with a cohort and a complete
/// value series for that variable — the same retention rule the ANOVA uses.
inline GroupMeansTable group_means(const WardMetricsPanel& panel,
                                   const CohortAssignment& cohorts,
                                   const std::vector<std::string>& variables) {
  GroupMeansTable out;
  const std::size_t ny = panel.years.size();
  for (const auto& var : variables) {
    auto& per_group = out.group_means[var];
    for (auto& v : per_group) v.assign(ny, std::nullopt);
    out.all_ward_means[var].assign(ny, std::nullopt);
    std::array<std::vector<double>, 4> sums;
    std::array<std::size_t, 4> counts{0, 0, 0, 0};
    for (auto& s : sums) s.assign(ny, 0.0);
    std::vector<double> all_sum(ny, 0.0);
    std::size_t all_count = 0;
    for (std::size_t w = 0; w < panel.ward_codes.size(); ++w) {
      if (!cohorts.group[w]) continue;
      std::vector<double> series;
      series.reserve(ny);
      bool complete = true;
      for (std::size_t yi = 0; yi < ny; ++yi) {
        auto v = panel.value(w, yi, var);
        if (!v) {
          complete = false;
          break;
        }
        series.push_back(*v);
      }
      if (!complete) continue;
      int gi = static_cast<int>(*cohorts.group[w]) - 1;
      ++counts[gi];
      ++all_count;
      for (std::size_t yi = 0; yi < ny; ++yi) {
        sums[gi][yi] += series[yi];
        all_sum[yi] += series[yi];
      }
    }
    for (int gi = 0; gi < 4; ++gi)
      if (counts[gi] > 0)
        for (std::size_t yi = 0; yi < ny; ++yi)
          per_group[gi][yi] = sums[gi][yi] / static_cast<double>(counts[gi]);
    if (all_count > 0)
      for (std::size_t yi = 0; yi < ny; ++yi)
        out.all_ward_means[var][yi] = all_sum[yi] / static_cast<double>(all_count);
    out.retained[var] = all_count;
  }
  return out;
}

inline void write_group_means_csv(const std::string& path, const WardMetricsPanel& panel,
                                  const GroupMeansTable& gm) {
  CsvWriter out(path);
  out.raw_line("group,variable,year,mean,all_ward_mean");
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& [var, per_group] : gm.group_means) {
    for (int gi = 0; gi < 4; ++gi)
      for (std::size_t yi = 0; yi < panel.years.size(); ++yi)
        out.row({std::string("G") + std::to_string(gi + 1), var,
                 std::to_string(panel.years[yi]), opt(per_group[gi][yi]),
                 opt(gm.all_ward_means.at(var)[yi])});
  }
}

inline nlohmann::json anova_result_json(const stats::AnovaResult& r) {
  nlohmann::json j;
  j["effect"] = r.effect;
  if (std::isfinite(r.f)) j["F"] = r.f;
  else j["F"] = "inf";
  j["df1"] = r.df1;
  j["df2"] = r.df2;
  j["p"] = r.p;
  j["degenerate"] = r.degenerate;
  return j;
}

/// One-way ANOVA on three-year means, mixed ANOVA plus pairwise year
/// comparisons on yearly values, and the group means behind the plots.
inline nlohmann::json anova_report(const WardMetricsPanel& panel,
                                   const CohortAssignment& cohorts,
                                   const std::vector<std::string>& variables) {
  nlohmann::json report;
  report["spec_version"] = kSpecVersion;
  report["group_sizes"] = {{"G1", cohorts.count(WardGroup::G1)},
                           {"G2", cohorts.count(WardGroup::G2)},
                           {"G3", cohorts.count(WardGroup::G3)},
                           {"G4", cohorts.count(WardGroup::G4)}};
  report["cohort_retained"] = cohorts.retained;
  nlohmann::json exclusions = nlohmann::json::object();
  for (const auto& [reason, n] : cohorts.exclusions) exclusions[reason] = n;
  report["cohort_exclusions"] = exclusions;

  auto gm = group_means(panel, cohorts, variables);
  nlohmann::json vars = nlohmann::json::object();
  const std::size_t ny = panel.years.size();
  for (const auto& var : variables) {
    nlohmann::json vj;
    // Retained wards: cohort assigned, complete series for this variable.
    std::vector<std::vector<double>> groups(4);
    std::vector<stats::PanelObservation> obs;
    for (std::size_t w = 0; w < panel.ward_codes.size(); ++w) {
      if (!cohorts.group[w]) continue;
      std::vector<double> series;
      bool complete = true;
      for (std::size_t yi = 0; yi < ny; ++yi) {
        auto v = panel.value(w, yi, var);
        if (!v) {
          complete = false;
          break;
        }
        series.push_back(*v);
      }
      if (!complete) continue;
      int glabel = static_cast<int>(*cohorts.group[w]);
      double mean = 0.0;
      for (double v : series) mean += v;
      mean /= static_cast<double>(ny);
      groups[glabel - 1].push_back(mean);
      for (std::size_t yi = 0; yi < ny; ++yi)
        obs.push_back({panel.ward_codes[w], glabel, panel.years[yi], series[yi]});
    }
    vj["retained_wards"] = gm.retained[var];

    try {
      std::vector<std::vector<double>> nonempty;
      for (auto& g : groups)
        if (!g.empty()) nonempty.push_back(g);
      vj["one_way"] = anova_result_json(stats::one_way_anova(nonempty));
    } catch (const std::exception& e) {
      vj["one_way"] = {{"error", e.what()}};
    }
    try {
      auto mixed = stats::mixed_anova(obs);
      vj["mixed"] = {{"group", anova_result_json(mixed.group)},
                     {"time", anova_result_json(mixed.time)},
                     {"interaction", anova_result_json(mixed.interaction)}};
    } catch (const std::exception& e) {
      vj["mixed"] = {{"error", e.what()}};
    }
    try {
      nlohmann::json pw = nlohmann::json::array();
      for (const auto& pc : stats::pairwise_time_comparisons(obs)) {
        nlohmann::json cj;
        cj["year_a"] = pc.year_a;
        cj["year_b"] = pc.year_b;
        cj["t"] = std::isfinite(pc.t) ? nlohmann::json(pc.t) : nlohmann::json("inf");
        cj["p_uncorrected"] = pc.p_uncorrected;
        cj["p_corrected"] = pc.p_corrected;
        cj["degenerate"] = pc.degenerate;
        pw.push_back(std::move(cj));
      }
      vj["pairwise_years"] = std::move(pw);
    } catch (const std::exception& e) {
      vj["pairwise_years"] = {{"error", e.what()}};
    }

    nlohmann::json means = nlohmann::json::object();
    for (int gi = 0; gi < 4; ++gi) {
      nlohmann::json per_year = nlohmann::json::object();
      for (std::size_t yi = 0; yi < ny; ++yi)
        if (auto v = gm.group_means[var][gi][yi])
          per_year[std::to_string(panel.years[yi])] = *v;
      means[std::string("G") + std::to_string(gi + 1)] = std::move(per_year);
    }
    vj["group_means"] = std::move(means);
    nlohmann::json all_means = nlohmann::json::object();
    for (std::size_t yi = 0; yi < ny; ++yi)
      if (auto v = gm.all_ward_means[var][yi])
        all_means[std::to_string(panel.years[yi])] = *v;
    vj["all_ward_means"] = std::move(all_means);
    vars[var] = std::move(vj);
  }
  report["variables"] = std::move(vars);
  return report;
}

struct EvaluationOutputs {
  nlohmann::json evaluation;                                   // evaluation.json
  std::vector<std::pair<std::string, double>> importance;      // importance.csv
  std::vector<ml::AblationRow> ablation;                       // ablation.csv
};

inline EvaluationOutputs run_prediction(const ml::DatasetAssembly& assembly,
                                        const RunConfig& cfg) {
  if (!cfg.seed) throw config_error("prediction stage requires a seed");
  const std::uint64_t seed = *cfg.seed;

  EvaluationOutputs out;
  nlohmann::json& ev = out.evaluation;
  ev["spec_version"] = kSpecVersion;
  ev["seed"] = seed;
  ev["folds"] = cfg.cv_folds;
  ev["positive_class"] = "improved";
  ev["decision_threshold"] = 0.5;
  nlohmann::json excl = nlohmann::json::object();
  for (const auto& [reason, n] : assembly.exclusions) excl[reason] = n;
  ev["exclusions"] = excl;
  ev["labeled_samples"] = assembly.samples.size();

  nlohmann::json sizes = nlohmann::json::object();
  nlohmann::json rows = nlohmann::json::array();
  for (int threshold : cfg.subset_thresholds) {
    auto subset = ml::subset_by_change(assembly.samples, threshold);
    sizes[std::to_string(threshold)] = subset.size();
    for (auto kind : cfg.classifiers) {
      nlohmann::json row;
      row["classifier"] = ml::to_string(kind);
      row["threshold"] = threshold;
      row["feature_set"] = "full";
      row["n_samples"] = subset.size();
      try {
        auto m = ml::evaluate_cv(subset, kind, ml::FeatureSet::full(), cfg.hyperparams,
                                 cfg.cv_folds, seed);
        row["auc"] = m.auc;
        row["accuracy"] = m.accuracy;
        row["precision"] = m.precision;
        row["auc_folds"] = m.auc_folds;
        row["precision_folds"] = m.precision_folds;
      } catch (const std::exception& e) {
        row["error"] = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  ev["subset_sizes"] = std::move(sizes);
  ev["rows"] = std::move(rows);

  auto forest = ml::train_classifier(ml::ClassifierKind::random_forest, assembly.samples,
                                     ml::FeatureSet::full(), cfg.hyperparams,
                                     derive_seed(seed, 0x1317));
  out.importance = ml::forest_importance(forest);
  std::stable_sort(out.importance.begin(), out.importance.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  out.ablation = ml::ablation_by_class(assembly.samples, cfg.classifiers, cfg.hyperparams,
                                       cfg.cv_folds, seed);
  return out;
}

inline void write_importance_csv(const std::string& path,
                                 const std::vector<std::pair<std::string, double>>& imp) {
  CsvWriter out(path);
  out.raw_line("feature,importance");
  for (const auto& [name, value] : imp) out.row({name, format_double(value)});
}

inline void write_ablation_csv(const std::string& path,
                               const std::vector<ml::AblationRow>& rows) {
  CsvWriter out(path);
  out.raw_line("feature_set,classifier,features,auc,accuracy,precision,n_samples");
  for (const auto& r : rows)
    out.row({r.feature_set, ml::to_string(r.classifier), std::to_string(r.feature_count),
             format_double(r.metrics.auc), format_double(r.metrics.accuracy),
             format_double(r.metrics.precision), std::to_string(r.metrics.n_samples)});
}

inline void write_graph_summary_json(const std::string& path,
                                     const std::vector<SnapshotGraph>& graphs) {
  nlohmann::json j;
  j["spec_version"] = kSpecVersion;
  nlohmann::json snaps = nlohmann::json::array();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    GraphSummary s = graphs[i].summarize();
    snaps.push_back({{"t", i + 1},
                     {"year", graphs[i].year()},
                     {"num_nodes", s.num_nodes},
                     {"num_edges", s.num_edges},
                     {"mean_clustering", s.mean_clustering},
                     {"mean_degree", s.mean_degree}});
  }
  j["snapshots"] = std::move(snaps);
  std::ofstream out(path, std::ios::binary);
  out << j.dump(1) << '\n';
}

inline void write_edges_csv(const std::string& path, const SnapshotGraph& g,
                            const VenueTable& venues) {
  CsvWriter out(path);
  out.raw_line("origin,dest,weight");
  for (const auto& e : g.edges())
    out.row({venues[e.origin].id, venues[e.dest].id, std::to_string(e.weight)});
}

// ---- end-to-end orchestration ------------------------------------------------

struct PipelineResult {
  int exit_code = 0;
  std::string failed_stage;
  std::string error;
  nlohmann::json manifest;
};

namespace detail {

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const config_error*>(&e)) return 1;
  if (dynamic_cast<const data_error*>(&e)) return 2;
  return 3;
}

}  // namespace detail

/// Runs ingest -> graphs -> metrics -> cohorts -> ANOVA -> prediction and
/// writes the seven artifacts plus a manifest with content hashes. On a
/// stage failure the artifacts written so far stay on disk and the manifest
/// records the failing stage.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  PipelineResult result;
  fs::create_directories(cfg.out_dir);
  std::vector<std::pair<std::string, std::string>> artifacts;  // name, path
  auto artifact_path = [&](const char* name) { return cfg.out_dir + "/" + name; };

  std::string stage = "ingest";
  try {
    LoadedInputs in = load_inputs(cfg);

    stage = "align";
    std::vector<std::string> fiscal;
    for (const auto& r : in.expenditure.records)
      if (std::find(fiscal.begin(), fiscal.end(), r.fiscal_year) == fiscal.end())
        fiscal.push_back(r.fiscal_year);
    if (fiscal.empty()) throw data_error("no fiscal years in expenditure data");
    PeriodMap periods = align_periods(fiscal, cfg.fiscal_offset);

    stage = "graph";
    std::vector<SnapshotGraph> graphs;
    for (int year : aligned_years(periods)) graphs.push_back(build_snapshot(in.log, year));

    stage = "metrics";
    VenueWardIndex index = assign_venues_to_wards(in.venues, in.wards);
    ApportionedExpenditure apportioned = apportion_expenditure(in.expenditure, in.wards);
    WardMetricsPanel panel = build_metrics_panel(graphs, index, in.venues, apportioned,
                                                 periods, in.wards, cfg.centre());
    write_panel_csv(panel, artifact_path("panel.csv"));
    artifacts.emplace_back("panel.csv", artifact_path("panel.csv"));

    stage = "cohort";
    CohortAssignment cohorts = build_cohorts(in.wards, in.imd, panel, cfg.deprivation_stat);
    write_cohorts_csv(artifact_path("cohorts.csv"), in.wards, cohorts);
    artifacts.emplace_back("cohorts.csv", artifact_path("cohorts.csv"));

    stage = "report";
    write_scatter_csv(artifact_path("scatter.csv"), panel, in.imd);
    artifacts.emplace_back("scatter.csv", artifact_path("scatter.csv"));

    stage = "anova";
    {
      nlohmann::json aj = anova_report(panel, cohorts, cfg.anova_variables);
      std::ofstream out(artifact_path("anova.json"), std::ios::binary);
      out << aj.dump(1) << '\n';
      artifacts.emplace_back("anova.json", artifact_path("anova.json"));
    }

    stage = "predict";
    {
      ml::DatasetAssembly assembly = ml::assemble_dataset(panel, in.imd, in.wards);
      EvaluationOutputs ev = run_prediction(assembly, cfg);
      std::ofstream out(artifact_path("evaluation.json"), std::ios::binary);
      out << ev.evaluation.dump(1) << '\n';
      out.close();
      artifacts.emplace_back("evaluation.json", artifact_path("evaluation.json"));
      write_importance_csv(artifact_path("importance.csv"), ev.importance);
      artifacts.emplace_back("importance.csv", artifact_path("importance.csv"));
      write_ablation_csv(artifact_path("ablation.csv"), ev.ablation);
      artifacts.emplace_back("ablation.csv", artifact_path("ablation.csv"));
    }
    stage = "manifest";
  } catch (const std::exception& e) {
    result.exit_code = detail::exit_code_for(e);
    result.failed_stage = stage;
    result.error = e.what();
  }

  nlohmann::json manifest;
  manifest["spec_version"] = kSpecVersion;
  manifest["status"] = result.exit_code == 0 ? "success" : "failed";
  if (result.exit_code != 0) {
    manifest["failed_stage"] = result.failed_stage;
    manifest["error"] = result.error;
  }
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, path] : artifacts) {
    nlohmann::json a;
    a["name"] = name;
    a["bytes"] = fs::exists(path) ? static_cast<std::uint64_t>(fs::file_size(path)) : 0;
    a["sha256"] = sha256_file(path);
    list.push_back(std::move(a));
  }
  manifest["artifacts"] = std::move(list);
  {
    std::ofstream out(cfg.out_dir + "/manifest.json", std::ios::binary);
    out << manifest.dump(1) << '\n';
  }
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace wardflow::pipeline
