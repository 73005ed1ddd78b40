#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "wardflow/pipeline.hpp"
#include "wardflow/synth.hpp"

using namespace wardflow;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / "wardflow_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

pipeline::RunConfig config_for(const synth::SynthBundle& bundle, const std::string& out) {
  pipeline::RunConfig cfg;
  cfg.venues_path = bundle.venues_path;
  cfg.transitions_path = bundle.transitions_path;
  cfg.wards_path = bundle.wards_path;
  cfg.expenditure_path = bundle.expenditure_path;
  cfg.imd_path = bundle.imd_path;
  cfg.out_dir = out;
  cfg.centre_lat = bundle.config.centre_lat;
  cfg.centre_lon = bundle.config.centre_lon;
  cfg.seed = 99;
  cfg.cv_folds = 5;
  cfg.subset_thresholds = {0, 5};
  return cfg;
}

synth::SynthBundle demo_bundle(const std::string& dir, std::uint64_t seed = 42) {
  synth::SynthConfig scfg;
  scfg.grid_rows = 5;
  scfg.grid_cols = 5;
  scfg.venues_per_ward_mean = 35;
  scfg.transitions_per_year = 25000;
  scfg.delta = 0.4;
  scfg.imd_noise = 3.0;
  scfg.seed = seed;
  auto bundle = synth::generate_city(scfg);
  synth::write_bundle(bundle, dir);
  return bundle;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("run_pipeline writes the seven artifacts plus a complete manifest") {
  auto bundle = demo_bundle(tmp_dir("pipe_city"));
  auto out = tmp_dir("pipe_out");
  auto result = pipeline::run_pipeline(config_for(bundle, out));
  REQUIRE(result.exit_code == 0);

  auto manifest = read_json(out + "/manifest.json");
  CHECK(manifest["status"] == "success");
  REQUIRE(manifest["artifacts"].size() == 7);
  std::vector<std::string> names;
  for (const auto& a : manifest["artifacts"]) {
    names.push_back(a["name"]);
    CHECK(fs::exists(out + "/" + a["name"].get<std::string>()));
    CHECK(a["sha256"].get<std::string>().size() == 64);
  }
  CHECK(names == std::vector<std::string>{"panel.csv", "cohorts.csv", "scatter.csv",
                                          "anova.json", "evaluation.json", "importance.csv",
                                          "ablation.csv"});
  // every file in the output directory is either an artifact or the manifest
  for (const auto& entry : fs::directory_iterator(out)) {
    std::string name = entry.path().filename().string();
    bool listed = name == "manifest.json" ||
                  std::find(names.begin(), names.end(), name) != names.end();
    CHECK(listed);
  }

  // the ANOVA report carries effects, means and sizes per variable
  auto aj = read_json(out + "/anova.json");
  CHECK(aj["spec_version"] == "1.0");
  REQUIRE(aj["variables"].contains("ACC"));
  const auto& acc = aj["variables"]["ACC"];
  for (const char* key : {"one_way", "mixed", "pairwise_years", "group_means",
                          "all_ward_means", "retained_wards"})
    CHECK(acc.contains(key));
  CHECK(acc["one_way"].contains("F"));
  CHECK(acc["one_way"].contains("p"));
  CHECK(acc["mixed"].contains("interaction"));
  CHECK(aj["group_sizes"].size() == 4);

  // evaluation report is schema-versioned with per-threshold rows
  auto ev = read_json(out + "/evaluation.json");
  CHECK(ev["spec_version"] == "1.0");
  CHECK(ev["positive_class"] == "improved");
  CHECK(ev["rows"].size() == 2 * 4);  // two thresholds x four classifiers

  // importance.csv is sorted descending
  std::ifstream imp(out + "/importance.csv");
  std::string line;
  std::getline(imp, line);
  CHECK(line == "feature,importance");
  double last = 1e9;
  int rows = 0;
  while (std::getline(imp, line)) {
    double v = std::stod(line.substr(line.find(',') + 1));
    CHECK(v <= last + 1e-12);
    last = v;
    ++rows;
  }
  CHECK(rows == 16);
}

TEST_CASE("same config and seed give byte-identical artifacts") {
  auto bundle = demo_bundle(tmp_dir("pipe_det_city"), 77);
  auto out1 = tmp_dir("pipe_det_1"), out2 = tmp_dir("pipe_det_2");
  auto r1 = pipeline::run_pipeline(config_for(bundle, out1));
  auto r2 = pipeline::run_pipeline(config_for(bundle, out2));
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  auto a1 = r1.manifest["artifacts"], a2 = r2.manifest["artifacts"];
  REQUIRE(a1.size() == a2.size());
  for (std::size_t i = 0; i < a1.size(); ++i) {
    CHECK(a1[i]["name"] == a2[i]["name"]);
    CHECK(a1[i]["sha256"] == a2[i]["sha256"]);
  }
}

TEST_CASE("a missing input fails the named stage with the data exit code") {
  auto bundle = demo_bundle(tmp_dir("pipe_fail_city"), 7);
  auto out = tmp_dir("pipe_fail_out");
  auto cfg = config_for(bundle, out);
  cfg.imd_path = out + "/does_not_exist.csv";
  auto result = pipeline::run_pipeline(cfg);
  CHECK(result.exit_code == 2);
  CHECK(result.failed_stage == "ingest");
  auto manifest = read_json(out + "/manifest.json");
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["failed_stage"] == "ingest");
  CHECK(manifest["error"].get<std::string>().find("does_not_exist.csv") != std::string::npos);
}

TEST_CASE("prediction without a seed is a config error") {
  auto bundle = demo_bundle(tmp_dir("pipe_seedless_city"), 8);
  auto out = tmp_dir("pipe_seedless_out");
  auto cfg = config_for(bundle, out);
  cfg.seed.reset();
  auto result = pipeline::run_pipeline(cfg);
  CHECK(result.exit_code == 1);
  CHECK(result.failed_stage == "predict");
  // artifacts before the failing stage are retained and listed
  auto manifest = read_json(out + "/manifest.json");
  CHECK(manifest["artifacts"].size() == 4);  // panel, cohorts, scatter, anova
  CHECK(fs::exists(out + "/panel.csv"));
}

TEST_CASE("scatter rows carry quadrants with ties going low") {
  WardMetricsPanel panel;
  panel.years = {2011};
  panel.ward_codes = {"W1", "W2", "W3", "W4"};
  panel.sub_region.assign(4, "Central");
  panel.area_km2.assign(4, 1.0);
  panel.distance_km.assign(4, 0.0);
  panel.rows.assign(1, std::vector<WardPeriodRow>(4));
  auto set = [&](int w, double cea, double cva) {
    panel.rows[0][w].cea = cea;
    panel.rows[0][w].cva = cva;
  };
  set(0, 1.2, 0.8);
  set(1, 1.0, 1.0);  // boundary -> low/low
  set(2, 0.4, 1.7);
  set(3, 1.3, 1.3);
  ImdTable imd;
  for (int i = 0; i < 4; ++i) {
    std::string code = "W" + std::to_string(i + 1);
    imd.by_edition[2010].emplace(code, imd.records.size());
    imd.records.push_back({code, 2010, 10.0 + i, i + 1});
  }
  auto path = testutil::write_temp("scatter_test.csv", "");
  std::size_t rows = pipeline::write_scatter_csv(path, panel, imd);
  CHECK(rows == 4);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "area,CEA,CVA,imd_score,quadrant");
  std::vector<std::string> got;
  while (std::getline(in, line)) got.push_back(line);
  REQUIRE(got.size() == 4);
  CHECK(got[0].find("high-CEA/low-CVA") != std::string::npos);
  CHECK(got[1].find("low-CEA/low-CVA") != std::string::npos);
  CHECK(got[2].find("low-CEA/high-CVA") != std::string::npos);
  CHECK(got[3].find("high-CEA/high-CVA") != std::string::npos);
}

TEST_CASE("group means: cardinality and the weighted-mean identity") {
  auto dir = tmp_dir("pipe_gm_city");
  auto bundle = demo_bundle(dir, 3);
  pipeline::RunConfig cfg = config_for(bundle, tmp_dir("pipe_gm_out"));
  auto in = pipeline::load_inputs(cfg);
  auto index = assign_venues_to_wards(in.venues, in.wards);
  auto ap = apportion_expenditure(in.expenditure, in.wards);
  auto pm = align_periods(ap.fiscal_years);
  std::vector<SnapshotGraph> graphs;
  for (int y : pipeline::aligned_years(pm)) graphs.push_back(build_snapshot(in.log, y));
  auto panel = build_metrics_panel(graphs, index, in.venues, ap, pm, in.wards, cfg.centre());
  auto cohorts = build_cohorts(in.wards, in.imd, panel);

  std::vector<std::string> vars = {"N", "ACC", "VCD"};
  auto gm = pipeline::group_means(panel, cohorts, vars);
  auto path = testutil::write_temp("group_means_test.csv", "");
  pipeline::write_group_means_csv(path, panel, gm);
  std::ifstream gmin(path);
  std::string line;
  int lines = 0;
  while (std::getline(gmin, line)) ++lines;
  CHECK(lines == 1 + 4 * 3 * static_cast<int>(vars.size()));

  // all-ward mean is the size-weighted mean of group means
  for (const auto& var : vars) {
    for (std::size_t yi = 0; yi < panel.years.size(); ++yi) {
      double weighted = 0.0;
      std::size_t total = 0;
      for (int gi = 0; gi < 4; ++gi) {
        auto mean = gm.group_means.at(var)[gi][yi];
        if (!mean) continue;
        // recover group size by counting retained wards in that group
        std::size_t size = 0;
        for (std::size_t w = 0; w < panel.ward_codes.size(); ++w) {
          if (!cohorts.group[w] || static_cast<int>(*cohorts.group[w]) - 1 != gi) continue;
          bool complete = true;
          for (std::size_t y2 = 0; y2 < panel.years.size(); ++y2)
            if (!panel.value(w, y2, var)) complete = false;
          if (complete) ++size;
        }
        weighted += *mean * static_cast<double>(size);
        total += size;
      }
      if (total == 0) continue;
      weighted /= static_cast<double>(total);
      CHECK(weighted == Catch::Approx(*gm.all_ward_means.at(var)[yi]).margin(1e-9));
    }
  }

  // constant variable -> identical means everywhere
  WardMetricsPanel flat = panel;
  for (auto& year_rows : flat.rows)
    for (auto& r : year_rows) r.acc = 0.37;
  auto gm2 = pipeline::group_means(flat, cohorts, {"ACC"});
  for (int gi = 0; gi < 4; ++gi)
    for (std::size_t yi = 0; yi < flat.years.size(); ++yi)
      if (auto v = gm2.group_means.at("ACC")[gi][yi])
        CHECK(*v == Catch::Approx(0.37).margin(1e-12));
}

TEST_CASE("dataset assembly labels and schema") {
  // two-period hand panel with complete features
  WardMetricsPanel panel;
  panel.years = {2011, 2012};
  panel.ward_codes = {"W1", "W2", "W3"};
  panel.sub_region = {"East", "West", "East"};
  panel.area_km2 = {1.0, 2.0, 3.0};
  panel.distance_km = {5.0, 6.0, 7.0};
  panel.rows.assign(2, std::vector<WardPeriodRow>(3));
  for (std::size_t yi = 0; yi < 2; ++yi)
    for (std::size_t w = 0; w < 3; ++w) {
      auto& r = panel.rows[yi][w];
      r.n_nodes = 10 + static_cast<int>(w + yi);
      r.ic = 5;
      r.oc = 4;
      r.ior = 1.25;
      r.acc = 0.3;
      r.vc = 2;
      r.vcd = 2.0;
      r.cva = 1.0;
      r.ce = 10.0;
      r.te = 100.0;
      r.cea = 1.1;
      r.ceop = 1.0;
      r.cech = 2.0;
      r.cels = 3.0;
      r.cers = 4.0;
      r.cet = 5.0;
      if (yi > 0) {
        r.grn = 1.1;
        r.gri = 1.0;
        r.gro = 1.0;
        r.grior = 1.0;
        r.gracc = 1.0;
        r.grvc = 1.0;
      }
    }
  ImdTable imd;
  auto add_rank = [&](const std::string& code, int edition, int rank) {
    imd.by_edition[edition].emplace(code, imd.records.size());
    imd.records.push_back({code, edition, 50.0 - rank, rank});
  };
  add_rank("W1", 2010, 1);
  add_rank("W2", 2010, 2);
  add_rank("W3", 2010, 3);
  add_rank("W1", 2015, 3);  // +2 improved
  add_rank("W2", 2015, 2);  // unchanged -> excluded
  add_rank("W3", 2015, 1);  // -2 worsened
  auto wards = testutil::ward_table({testutil::square_ward("W1", 0, 0, 1),
                                     testutil::square_ward("W2", 0, 1, 1),
                                     testutil::square_ward("W3", 0, 2, 1)});
  auto assembly = ml::assemble_dataset(panel, imd, wards);
  REQUIRE(assembly.samples.size() == 2);
  CHECK(assembly.exclusions.at("zero rank change") == 1);
  const auto& s1 = assembly.samples[0];
  CHECK(s1.ward_code == "W1");
  CHECK(s1.label == 1);
  CHECK(s1.delta_rank == 2);
  CHECK(s1.values[0] == 1.0);       // initial rank
  CHECK(s1.values[2] == 1.0);       // area
  CHECK(s1.values[3] == 5.0);       // distance
  CHECK(s1.sub_region == "East");
  CHECK(s1.values[10] == Catch::Approx(1.1));  // CEA mean
  CHECK(assembly.samples[1].label == 0);

  // a large positive swing mirrors the headline example: rank 100 -> 312
  ImdTable imd2;
  imd2.by_edition[2010].emplace("W1", imd2.records.size());
  imd2.records.push_back({"W1", 2010, 60.0, 100});
  imd2.by_edition[2015].emplace("W1", imd2.records.size());
  imd2.records.push_back({"W1", 2015, 20.0, 312});
  WardMetricsPanel p1 = panel;
  p1.ward_codes = {"W1"};
  p1.sub_region = {"East"};
  p1.area_km2 = {1.0};
  p1.distance_km = {5.0};
  p1.rows[0].resize(1);
  p1.rows[1].resize(1);
  auto wards1 = testutil::ward_table({testutil::square_ward("W1", 0, 0, 1)});
  auto a2 = ml::assemble_dataset(p1, imd2, wards1);
  REQUIRE(a2.samples.size() == 1);
  CHECK(a2.samples[0].delta_rank == 212);
  CHECK(a2.samples[0].label == 1);
}

TEST_CASE("dataset assembly excludes wards with missing features, counting reasons") {
  WardMetricsPanel panel;
  panel.years = {2011, 2012};
  panel.ward_codes = {"W1"};
  panel.sub_region = {"East"};
  panel.area_km2 = {1.0};
  panel.distance_km = {2.0};
  panel.rows.assign(2, std::vector<WardPeriodRow>(1));
  // IOR missing in the first year -> GRIOR cannot be formed
  panel.rows[0][0].ior = std::nullopt;
  panel.rows[1][0].ior = 1.0;
  ImdTable imd;
  imd.by_edition[2010].emplace("W1", imd.records.size());
  imd.records.push_back({"W1", 2010, 10.0, 1});
  imd.by_edition[2015].emplace("W1", imd.records.size());
  imd.records.push_back({"W1", 2015, 9.0, 2});
  auto wards = testutil::ward_table({testutil::square_ward("W1", 0, 0, 1)});
  auto assembly = ml::assemble_dataset(panel, imd, wards);
  CHECK(assembly.samples.empty());
  CHECK(assembly.exclusions.size() == 1);
  CHECK(assembly.exclusions.begin()->first.find("missing growth feature") == 0);
}

TEST_CASE("config files parse with overrides and reject unknown keys") {
  auto path = testutil::write_temp("run.conf",
                                   "# sample config\n"
                                   "venues = /data/venues.csv\n"
                                   "folds=7\n"
                                   "thresholds = 0, 10, 20\n"
                                   "classifiers = naive_bayes,random_forest\n"
                                   "deprivation_stat = mean_score\n");
  pipeline::RunConfig cfg;
  pipeline::load_config_file(cfg, path);
  CHECK(cfg.venues_path == "/data/venues.csv");
  CHECK(cfg.cv_folds == 7);
  CHECK(cfg.subset_thresholds == std::vector<int>{0, 10, 20});
  CHECK(cfg.classifiers.size() == 2);
  CHECK(cfg.deprivation_stat == DeprivationStatistic::mean_score);

  auto bad = testutil::write_temp("bad.conf", "not_a_key = 1\n");
  pipeline::RunConfig cfg2;
  CHECK_THROWS_AS(pipeline::load_config_file(cfg2, bad), config_error);
}

TEST_CASE("graph summary artifact mirrors the snapshot table shape") {
  auto dir = tmp_dir("pipe_gs_city");
  auto bundle = demo_bundle(dir, 21);
  auto cfg = config_for(bundle, tmp_dir("pipe_gs_out"));
  auto in = pipeline::load_inputs(cfg);
  std::vector<SnapshotGraph> graphs;
  for (int y : {2011, 2012, 2013}) graphs.push_back(build_snapshot(in.log, y));
  auto path = cfg.out_dir + "/graph_summary.json";
  fs::create_directories(cfg.out_dir);
  pipeline::write_graph_summary_json(path, graphs);
  auto j = read_json(path);
  REQUIRE(j["snapshots"].size() == 3);
  CHECK(j["snapshots"][0]["t"] == 1);
  CHECK(j["snapshots"][0]["year"] == 2011);
  CHECK(j["snapshots"][2]["year"] == 2013);
  for (const auto& s : j["snapshots"]) {
    double k = s["mean_degree"].get<double>();
    double v = s["num_nodes"].get<double>(), e = s["num_edges"].get<double>();
    CHECK(k == Catch::Approx(2.0 * e / v).margin(1e-9));
  }
}
