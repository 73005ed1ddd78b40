#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wardflow/cohort.hpp"
#include "wardflow/graph.hpp"
#include "wardflow/ingest.hpp"
#include "wardflow/metrics.hpp"
#include "wardflow/pipeline.hpp"
#include "wardflow/predict.hpp"
#include "wardflow/synth.hpp"

namespace {

using wardflow::pipeline::RunConfig;

struct CliState {
  RunConfig cfg;  // receives explicit flag values during parsing
  std::string config_file;
  std::string in_dir;
  std::optional<long long> seed_flag;
  std::string classifiers_csv, thresholds_csv, anova_vars_csv;
};

void add_input_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_file, "key=value config file, overridden by flags");
  cmd->add_option("--in", st.in_dir,
                  "input directory holding the five standard input files");
  cmd->add_option("--venues", st.cfg.venues_path, "venues.csv path");
  cmd->add_option("--transitions", st.cfg.transitions_path, "transitions.csv path");
  cmd->add_option("--wards", st.cfg.wards_path, "wards.geojson path");
  cmd->add_option("--expenditure", st.cfg.expenditure_path, "expenditure.csv path");
  cmd->add_option("--imd", st.cfg.imd_path, "imd.csv path");
}

void add_common_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--out", st.cfg.out_dir, "output directory");
  cmd->add_option("--centre-lat", st.cfg.centre_lat, "city centre latitude");
  cmd->add_option("--centre-lon", st.cfg.centre_lon, "city centre longitude");
  cmd->add_option("--fiscal-offset", st.cfg.fiscal_offset,
                  "calendar year = fiscal start year + offset");
  cmd->add_option("--folds", st.cfg.cv_folds, "cross-validation folds");
  cmd->add_option("--seed", st.seed_flag, "seed for stochastic stages");
  cmd->add_option("--classifiers", st.classifiers_csv, "comma list of classifier kinds");
  cmd->add_option("--thresholds", st.thresholds_csv, "comma list of |rank change| thresholds");
  cmd->add_option("--anova-variables", st.anova_vars_csv, "comma list of panel variables");
}

// Precedence: defaults < config file < --in shorthand < explicit flags.
void finalize(CliState& st) {
  RunConfig cfg;
  if (!st.config_file.empty()) wardflow::pipeline::load_config_file(cfg, st.config_file);
  if (!st.in_dir.empty()) {
    cfg.venues_path = st.in_dir + "/venues.csv";
    cfg.transitions_path = st.in_dir + "/transitions.csv";
    cfg.wards_path = st.in_dir + "/wards.geojson";
    cfg.expenditure_path = st.in_dir + "/expenditure.csv";
    cfg.imd_path = st.in_dir + "/imd.csv";
  }
  if (!st.cfg.venues_path.empty()) cfg.venues_path = st.cfg.venues_path;
  if (!st.cfg.transitions_path.empty()) cfg.transitions_path = st.cfg.transitions_path;
  if (!st.cfg.wards_path.empty()) cfg.wards_path = st.cfg.wards_path;
  if (!st.cfg.expenditure_path.empty()) cfg.expenditure_path = st.cfg.expenditure_path;
  if (!st.cfg.imd_path.empty()) cfg.imd_path = st.cfg.imd_path;

  RunConfig defaults;
  if (st.cfg.out_dir != defaults.out_dir) cfg.out_dir = st.cfg.out_dir;
  if (st.cfg.centre_lat != defaults.centre_lat) cfg.centre_lat = st.cfg.centre_lat;
  if (st.cfg.centre_lon != defaults.centre_lon) cfg.centre_lon = st.cfg.centre_lon;
  if (st.cfg.fiscal_offset != defaults.fiscal_offset) cfg.fiscal_offset = st.cfg.fiscal_offset;
  if (st.cfg.cv_folds != defaults.cv_folds) cfg.cv_folds = st.cfg.cv_folds;
  if (st.seed_flag) cfg.seed = static_cast<std::uint64_t>(*st.seed_flag);
  if (!st.classifiers_csv.empty())
    wardflow::pipeline::apply_config_entry(cfg, "classifiers", st.classifiers_csv);
  if (!st.thresholds_csv.empty())
    wardflow::pipeline::apply_config_entry(cfg, "thresholds", st.thresholds_csv);
  if (!st.anova_vars_csv.empty())
    wardflow::pipeline::apply_config_entry(cfg, "anova_variables", st.anova_vars_csv);
  st.cfg = cfg;
}

void require_inputs(const RunConfig& cfg) {
  for (const auto& [name, path] :
       {std::pair<const char*, const std::string&>{"venues", cfg.venues_path},
        {"transitions", cfg.transitions_path},
        {"wards", cfg.wards_path},
        {"expenditure", cfg.expenditure_path},
        {"imd", cfg.imd_path}})
    if (path.empty())
      throw wardflow::config_error(std::string("missing required input: --") + name);
}

struct Prepared {
  wardflow::pipeline::LoadedInputs in;
  wardflow::PeriodMap periods;
  std::vector<wardflow::SnapshotGraph> graphs;
  wardflow::VenueWardIndex index;
  wardflow::ApportionedExpenditure apportioned;
  wardflow::WardMetricsPanel panel;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p;
  p.in = wardflow::pipeline::load_inputs(cfg);
  std::vector<std::string> fiscal;
  for (const auto& r : p.in.expenditure.records)
    if (std::find(fiscal.begin(), fiscal.end(), r.fiscal_year) == fiscal.end())
      fiscal.push_back(r.fiscal_year);
  if (fiscal.empty()) throw wardflow::data_error("no fiscal years in expenditure data");
  p.periods = wardflow::align_periods(fiscal, cfg.fiscal_offset);
  for (int year : wardflow::pipeline::aligned_years(p.periods))
    p.graphs.push_back(wardflow::build_snapshot(p.in.log, year));
  p.index = wardflow::assign_venues_to_wards(p.in.venues, p.in.wards);
  p.apportioned = wardflow::apportion_expenditure(p.in.expenditure, p.in.wards);
  p.panel = wardflow::build_metrics_panel(p.graphs, p.index, p.in.venues, p.apportioned,
                                          p.periods, p.in.wards, cfg.centre());
  return p;
}

void print_rejects(const char* name, std::size_t rows, const wardflow::RejectionLog& log) {
  std::printf("%s: %zu rows, %zu rejected\n", name, rows, log.rejected);
  for (const auto& [reason, n] : log.by_reason)
    std::printf("  %s: %zu\n", reason.c_str(), n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"culture-led regeneration analytics over venue transition graphs"};
  app.require_subcommand(1);
  CliState st;

  // synth has its own knobs
  wardflow::synth::SynthConfig synth_cfg;
  std::string synth_out = "synth_city";
  std::string synth_mode = "cea_deprived";
  double synth_venue_delta = -1.0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic city bundle");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--rows", synth_cfg.grid_rows, "ward grid rows");
  synth->add_option("--cols", synth_cfg.grid_cols, "ward grid cols");
  synth->add_option("--borough-block", synth_cfg.borough_block, "wards per borough side");
  synth->add_option("--venues-mean", synth_cfg.venues_per_ward_mean, "mean venues per ward");
  synth->add_option("--venues-dispersion", synth_cfg.venues_per_ward_dispersion,
                    "per-ward venue count dispersion (CV)");
  synth->add_option("--cultural-fraction", synth_cfg.cultural_fraction,
                    "fraction of cultural venues");
  synth->add_option("--transitions", synth_cfg.transitions_per_year, "transitions per year");
  synth->add_option("--years", synth_cfg.years, "number of calendar years");
  synth->add_option("--first-year", synth_cfg.first_year, "first calendar year");
  synth->add_option("--gravity", synth_cfg.gravity_exponent, "gravity exponent");
  synth->add_option("--delta", synth_cfg.delta, "treated in-flow growth multiplier");
  synth->add_option("--venue-delta", synth_venue_delta,
                    "treated venue-creation multiplier (defaults to --delta)");
  synth->add_option("--score-scale", synth_cfg.score_effect_scale,
                    "IMD score shift per unit delta");
  synth->add_option("--sigma", synth_cfg.imd_noise, "IMD update noise");
  synth->add_option("--mode", synth_mode, "cea_deprived | random | graded");
  synth->add_option("--treated-fraction", synth_cfg.treated_fraction,
                    "treated share in random mode");

  auto* ingest = app.add_subcommand("ingest", "parse inputs and report rejection counts");
  add_input_options(ingest, st);

  auto* graph = app.add_subcommand("graph", "build yearly graphs, dump edges and summary");
  add_input_options(graph, st);
  add_common_options(graph, st);

  auto* metrics = app.add_subcommand("metrics", "build the ward metrics panel CSV");
  add_input_options(metrics, st);
  add_common_options(metrics, st);

  auto* cohort = app.add_subcommand("cohort", "assign wards to the four analysis groups");
  add_input_options(cohort, st);
  add_common_options(cohort, st);

  auto* anova = app.add_subcommand("anova", "one-way and mixed ANOVA report");
  add_input_options(anova, st);
  add_common_options(anova, st);

  auto* predict = app.add_subcommand("predict", "supervised prediction evaluation");
  add_input_options(predict, st);
  add_common_options(predict, st);

  auto* report = app.add_subcommand("report", "scatter and group-means plot data");
  add_input_options(report, st);
  add_common_options(report, st);

  auto* run_all = app.add_subcommand("run-all", "full pipeline with artifact manifest");
  add_input_options(run_all, st);
  add_common_options(run_all, st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  namespace fs = std::filesystem;
  try {
    finalize(st);
    if (synth->parsed()) {
      if (synth_venue_delta >= 0.0) synth_cfg.venue_delta = synth_venue_delta;
      if (synth_mode == "cea_deprived")
        synth_cfg.treatment_mode = wardflow::synth::TreatmentMode::cea_deprived;
      else if (synth_mode == "random")
        synth_cfg.treatment_mode = wardflow::synth::TreatmentMode::random_assignment;
      else if (synth_mode == "graded")
        synth_cfg.treatment_mode = wardflow::synth::TreatmentMode::graded;
      else
        throw wardflow::config_error("unknown synth mode: " + synth_mode);
      auto bundle = wardflow::synth::generate_city(synth_cfg);
      wardflow::synth::write_bundle(bundle, synth_out);
      std::printf("wrote %zu venues, %zu transitions, %zu wards to %s\n",
                  bundle.venues.size(), bundle.transitions.size(), bundle.wards.size(),
                  synth_out.c_str());
      std::printf("treated wards: %zu\n", bundle.ledger.treated.size());
      return 0;
    }

    require_inputs(st.cfg);

    if (ingest->parsed()) {
      auto in = wardflow::pipeline::load_inputs(st.cfg);
      print_rejects("venues", in.venues.input_rows, in.venues.rejects);
      print_rejects("transitions", in.log.input_rows, in.log.rejects);
      print_rejects("wards", in.wards.input_features, in.wards.rejects);
      print_rejects("expenditure", in.expenditure.input_rows, in.expenditure.rejects);
      print_rejects("imd", in.imd.input_rows, in.imd.rejects);
      std::printf("retained: %zu venues, %zu transitions, %zu wards, %zu expenditure, %zu imd\n",
                  in.venues.size(), in.log.transitions.size(), in.wards.size(),
                  in.expenditure.records.size(), in.imd.records.size());
      return 0;
    }

    if (run_all->parsed()) {
      auto result = wardflow::pipeline::run_pipeline(st.cfg);
      if (result.exit_code == 0) {
        std::printf("pipeline complete; %zu artifacts in %s\n",
                    result.manifest["artifacts"].size(), st.cfg.out_dir.c_str());
      } else {
        std::fprintf(stderr, "pipeline failed at stage %s: %s\n",
                     result.failed_stage.c_str(), result.error.c_str());
      }
      return result.exit_code;
    }

    fs::create_directories(st.cfg.out_dir);
    Prepared p = prepare(st.cfg);

    if (graph->parsed()) {
      wardflow::pipeline::write_graph_summary_json(st.cfg.out_dir + "/graph_summary.json",
                                                   p.graphs);
      for (const auto& g : p.graphs)
        wardflow::pipeline::write_edges_csv(
            st.cfg.out_dir + "/edges_" + std::to_string(g.year()) + ".csv", g, p.in.venues);
      for (const auto& g : p.graphs) {
        auto s = g.summarize();
        std::printf("year %d: |V|=%zu |E|=%zu <C>=%.4f <k>=%.2f\n", g.year(), s.num_nodes,
                    s.num_edges, s.mean_clustering, s.mean_degree);
      }
      return 0;
    }
    if (metrics->parsed()) {
      wardflow::write_panel_csv(p.panel, st.cfg.out_dir + "/panel.csv");
      std::printf("panel: %zu wards x %zu periods -> %s/panel.csv\n",
                  p.panel.ward_codes.size(), p.panel.years.size(), st.cfg.out_dir.c_str());
      return 0;
    }
    if (cohort->parsed()) {
      auto cohorts = wardflow::build_cohorts(p.in.wards, p.in.imd, p.panel,
                                             st.cfg.deprivation_stat);
      wardflow::pipeline::write_cohorts_csv(st.cfg.out_dir + "/cohorts.csv", p.in.wards,
                                            cohorts);
      std::printf("G1=%zu G2=%zu G3=%zu G4=%zu retained=%zu\n",
                  cohorts.count(wardflow::WardGroup::G1),
                  cohorts.count(wardflow::WardGroup::G2),
                  cohorts.count(wardflow::WardGroup::G3),
                  cohorts.count(wardflow::WardGroup::G4), cohorts.retained);
      return 0;
    }
    if (anova->parsed()) {
      auto cohorts = wardflow::build_cohorts(p.in.wards, p.in.imd, p.panel,
                                             st.cfg.deprivation_stat);
      auto aj = wardflow::pipeline::anova_report(p.panel, cohorts, st.cfg.anova_variables);
      std::ofstream out(st.cfg.out_dir + "/anova.json", std::ios::binary);
      out << aj.dump(1) << '\n';
      std::printf("anova report -> %s/anova.json\n", st.cfg.out_dir.c_str());
      return 0;
    }
    if (predict->parsed()) {
      auto assembly = wardflow::ml::assemble_dataset(p.panel, p.in.imd, p.in.wards);
      auto ev = wardflow::pipeline::run_prediction(assembly, st.cfg);
      std::ofstream out(st.cfg.out_dir + "/evaluation.json", std::ios::binary);
      out << ev.evaluation.dump(1) << '\n';
      wardflow::pipeline::write_importance_csv(st.cfg.out_dir + "/importance.csv",
                                               ev.importance);
      wardflow::pipeline::write_ablation_csv(st.cfg.out_dir + "/ablation.csv", ev.ablation);
      std::printf("%zu labeled samples; reports in %s\n", assembly.samples.size(),
                  st.cfg.out_dir.c_str());
      return 0;
    }
    if (report->parsed()) {
      auto cohorts = wardflow::build_cohorts(p.in.wards, p.in.imd, p.panel,
                                             st.cfg.deprivation_stat);
      std::size_t rows = wardflow::pipeline::write_scatter_csv(
          st.cfg.out_dir + "/scatter.csv", p.panel, p.in.imd);
      auto gm = wardflow::pipeline::group_means(p.panel, cohorts, st.cfg.anova_variables);
      wardflow::pipeline::write_group_means_csv(st.cfg.out_dir + "/group_means.csv", p.panel,
                                                gm);
      std::printf("scatter rows: %zu; group means -> %s/group_means.csv\n", rows,
                  st.cfg.out_dir.c_str());
      return 0;
    }
  } catch (const wardflow::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const wardflow::data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
