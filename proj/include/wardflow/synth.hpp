#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardflow/csv.hpp"
#include "wardflow/geo.hpp"
#include "wardflow/isotime.hpp"
#include "wardflow/metrics.hpp"
#include "wardflow/random.hpp"
#include "wardflow/types.hpp"

namespace wardflow::synth {

/// How ward-level treatment effects are assigned.
///   cea_deprived: deprived wards with mean CEA > 1 get effect 1 (the
///     regeneration story the analytics looks for).
///   random_assignment: effect 1 with probability treated_fraction,
///     independent of expenditure and deprivation.
///   graded: effect drawn uniform in [-1, 1] per ward, so signal strength
///     scales with the realized rank change.
enum class TreatmentMode { cea_deprived, random_assignment, graded };

struct SynthConfig {
  int grid_rows = 4;
  int grid_cols = 5;
  int borough_block = 2;  // boroughs are blocks of this many wards per side
  double venues_per_ward_mean = 30.0;
  double venues_per_ward_dispersion = 0.25;  // CV of the per-ward gamma multiplier
  double cultural_fraction = 0.3;
  std::int64_t transitions_per_year = 50000;
  int years = 3;
  int first_year = 2011;
  double gravity_exponent = 1.5;
  // Treated-ward year-over-year multipliers: in-flow attraction scales by
  // (1+delta)^effect per year; venue creation by (1+venue_delta)^effect.
  double delta = 0.0;
  std::optional<double> venue_delta;  // defaults to delta
  double score_effect_scale = 40.0;   // score shift = scale * delta * effect
  double imd_noise = 0.0;
  TreatmentMode treatment_mode = TreatmentMode::cea_deprived;
  double treated_fraction = 0.5;
  std::uint64_t seed = 1;
  double cell_deg = 0.01;
  double centre_lat = 51.5074;
  double centre_lon = -0.1278;

  double effective_venue_delta() const { return venue_delta ? *venue_delta : delta; }
};

struct SynthWard {
  std::string code, borough, sub_region;
  double lat_lo = 0, lat_hi = 0, lon_lo = 0, lon_hi = 0;
  double area_km2 = 0;
  std::int64_t population = 0;
};

struct SynthVenue {
  std::string id;
  double lat = 0, lon = 0;
  int ward = 0;
  bool cultural = false;
  std::int64_t created_at = 0;
  int created_year = 0;
  std::int64_t user_count = 1;
  std::string category, parent_category;
};

struct SynthTransition {
  std::uint32_t origin = 0, dest = 0;
  std::int64_t t0 = 0, t1 = 0;
  int year = 0;
};

/// Ground truth written beside the CSVs so tests never re-derive hidden state.
struct SynthLedger {
  std::vector<double> effect;         // per ward
  std::vector<double> inflow_factor;  // per ward, per-year multiplier
  std::vector<double> venue_factor;
  std::vector<double> score2010, score2015;
  std::vector<int> rank2010, rank2015, delta_rank;
  std::vector<double> cea_mean;
  std::vector<int> treated;  // ward indexes with positive effect
  std::vector<std::int64_t> transitions_emitted;  // per year
  std::size_t venues_emitted = 0;
};

struct SynthBundle {
  SynthConfig config;
  std::vector<SynthWard> wards;
  std::vector<SynthVenue> venues;
  std::vector<SynthTransition> transitions;
  std::vector<std::string> borough_codes;
  std::vector<std::string> fiscal_years;  // aligned to calendar years first..first+years-1
  // [fiscal year][borough][category]
  std::vector<std::vector<std::array<double, kExpenditureCategoryCount>>> expenditure;
  SynthLedger ledger;

  std::string dir;
  std::string venues_path, transitions_path, wards_path, expenditure_path, imd_path,
      ledger_path;
};

namespace detail {

inline std::string pad_number(const char* prefix, int value, int width) {
  std::string num = std::to_string(value);
  std::string out(prefix);
  for (int i = static_cast<int>(num.size()); i < width; ++i) out += '0';
  return out + num;
}

inline std::string fiscal_label(int calendar_year) {
  int start = calendar_year - 1;
  int tail = calendar_year % 100;
  std::string t = std::to_string(tail);
  if (t.size() < 2) t = "0" + t;
  return std::to_string(start) + "/" + t;
}

/// Descending-score ranks, ties broken by index; rank 1 = most deprived.
inline std::vector<int> rank_descending(const std::vector<double>& score) {
  std::vector<std::size_t> order(score.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  std::vector<int> rank(score.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    rank[order[pos]] = static_cast<int>(pos + 1);
  return rank;
}

inline std::size_t cum_search(const std::vector<double>& cum, double u) {
  // cum is an inclusive prefix sum; returns the first index with cum > u.
  return static_cast<std::size_t>(
      std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
}

}  // namespace detail

/// Generates a deterministic city: square-grid wards grouped into boroughs,
/// venues with creation times and popularity, three years of gravity-model
/// transitions, borough expenditure, and two IMD editions with a planted
/// effect. Same seed, same bundle, byte for byte.
inline SynthBundle generate_city(const SynthConfig& cfg) {
  if (cfg.grid_rows < 1 || cfg.grid_cols < 1 || cfg.years < 1 ||
      cfg.transitions_per_year < 0 || cfg.venues_per_ward_mean <= 0.0)
    throw config_error("generate_city: invalid grid/venue/transition counts");
  if (cfg.cultural_fraction < 0.0 || cfg.cultural_fraction > 1.0)
    throw config_error("generate_city: cultural fraction must be in [0,1]");
  if (cfg.delta < 0.0 || cfg.effective_venue_delta() < 0.0 || cfg.imd_noise < 0.0)
    throw config_error("generate_city: delta and noise must be nonnegative");

  SynthBundle b;
  b.config = cfg;
  const int nw = cfg.grid_rows * cfg.grid_cols;

  // --- wards and boroughs -------------------------------------------------
  const double lat0 = cfg.centre_lat - cfg.grid_rows * cfg.cell_deg / 2.0;
  const double lon0 = cfg.centre_lon - cfg.grid_cols * cfg.cell_deg / 2.0;
  const double km_lat = 110.574 * cfg.cell_deg;
  const double km_lon = 111.320 * std::cos(cfg.centre_lat * kDegToRad) * cfg.cell_deg;
  const int bcols = (cfg.grid_cols + cfg.borough_block - 1) / cfg.borough_block;

  Rng ward_rng(derive_seed(cfg.seed, 1));
  std::vector<int> ward_borough(nw);
  std::set<int> borough_ids;
  for (int r = 0; r < cfg.grid_rows; ++r) {
    for (int c = 0; c < cfg.grid_cols; ++c) {
      int w = r * cfg.grid_cols + c;
      SynthWard ward;
      ward.code = detail::pad_number("W", w + 1, 4);
      int bid = (r / cfg.borough_block) * bcols + (c / cfg.borough_block);
      ward_borough[w] = bid;
      borough_ids.insert(bid);
      ward.borough = detail::pad_number("B", bid + 1, 3);
      double rr = (r + 0.5) / cfg.grid_rows - 0.5;
      double cc = (c + 0.5) / cfg.grid_cols - 0.5;
      if (std::fabs(rr) < 1.0 / 6 && std::fabs(cc) < 1.0 / 6) ward.sub_region = "Central";
      else if (std::fabs(rr) >= std::fabs(cc)) ward.sub_region = rr < 0 ? "South" : "North";
      else ward.sub_region = cc < 0 ? "West" : "East";
      ward.lat_lo = lat0 + r * cfg.cell_deg;
      ward.lat_hi = ward.lat_lo + cfg.cell_deg;
      ward.lon_lo = lon0 + c * cfg.cell_deg;
      ward.lon_hi = ward.lon_lo + cfg.cell_deg;
      ward.area_km2 = km_lat * km_lon;
      ward.population = ward_rng.uniform_int(8000, 15000);
      b.wards.push_back(std::move(ward));
    }
  }
  for (int bid : borough_ids) b.borough_codes.push_back(detail::pad_number("B", bid + 1, 3));
  const int nb = static_cast<int>(b.borough_codes.size());
  std::vector<int> borough_slot(bcols * ((cfg.grid_rows + cfg.borough_block - 1) /
                                         cfg.borough_block) +
                                    bcols,
                                -1);
  {
    int slot = 0;
    for (int bid : borough_ids) borough_slot[bid] = slot++;
  }

  // --- IMD 2010 ------------------------------------------------------------
  Rng imd_rng(derive_seed(cfg.seed, 2));
  b.ledger.score2010.resize(nw);
  for (int w = 0; w < nw; ++w) b.ledger.score2010[w] = imd_rng.normal(30.0, 8.0);
  b.ledger.rank2010 = detail::rank_descending(b.ledger.score2010);

  // --- expenditure -----------------------------------------------------------
  Rng exp_rng(derive_seed(cfg.seed, 3));
  for (int t = 0; t < cfg.years; ++t)
    b.fiscal_years.push_back(detail::fiscal_label(cfg.first_year + t));
  std::vector<double> te_base(nb), culture_share(nb);
  std::vector<std::array<double, 5>> cat_weight(nb);
  for (int bi = 0; bi < nb; ++bi) {
    te_base[bi] = exp_rng.uniform(5e7, 1.5e8);
    culture_share[bi] = 0.05 * std::exp(exp_rng.normal(0.0, 0.5));
    double sum = 0.0;
    for (int k = 0; k < 5; ++k) {
      cat_weight[bi][k] = exp_rng.uniform(0.5, 1.5);
      sum += cat_weight[bi][k];
    }
    for (int k = 0; k < 5; ++k) cat_weight[bi][k] /= sum;
  }
  b.expenditure.assign(cfg.years,
                       std::vector<std::array<double, kExpenditureCategoryCount>>(
                           nb, std::array<double, kExpenditureCategoryCount>{}));
  for (int t = 0; t < cfg.years; ++t) {
    for (int bi = 0; bi < nb; ++bi) {
      double te = te_base[bi] * exp_rng.uniform(0.97, 1.03);
      double ce = culture_share[bi] * te * exp_rng.uniform(0.97, 1.03);
      auto& cell = b.expenditure[t][bi];
      cell[static_cast<int>(ExpenditureCategory::culture_heritage)] = ce * cat_weight[bi][0];
      cell[static_cast<int>(ExpenditureCategory::recreation_sport)] = ce * cat_weight[bi][1];
      cell[static_cast<int>(ExpenditureCategory::open_spaces)] = ce * cat_weight[bi][2];
      cell[static_cast<int>(ExpenditureCategory::tourism)] = ce * cat_weight[bi][3];
      cell[static_cast<int>(ExpenditureCategory::library_service)] = ce * cat_weight[bi][4];
      cell[static_cast<int>(ExpenditureCategory::total_services)] = te;
    }
  }

  // Ward-level mean CEA: with uniform apportionment the ward value equals
  // the borough value, and ward sums collapse to borough sums.
  b.ledger.cea_mean.assign(nw, 0.0);
  for (int t = 0; t < cfg.years; ++t) {
    double sum_ce = 0.0, sum_te = 0.0;
    for (int bi = 0; bi < nb; ++bi) {
      const auto& cell = b.expenditure[t][bi];
      double ce = cell[0] + cell[1] + cell[2] + cell[3] + cell[4];
      sum_ce += ce;
      sum_te += cell[static_cast<int>(ExpenditureCategory::total_services)];
    }
    double city = sum_ce / sum_te;
    for (int w = 0; w < nw; ++w) {
      const auto& cell = b.expenditure[t][borough_slot[ward_borough[w]]];
      double ce = cell[0] + cell[1] + cell[2] + cell[3] + cell[4];
      double te = cell[static_cast<int>(ExpenditureCategory::total_services)];
      b.ledger.cea_mean[w] += (ce / te) / city / cfg.years;
    }
  }

  // --- treatment effects ----------------------------------------------------
  Rng treat_rng(derive_seed(cfg.seed, 4));
  b.ledger.effect.assign(nw, 0.0);
  for (int w = 0; w < nw; ++w) {
    switch (cfg.treatment_mode) {
      case TreatmentMode::cea_deprived: {
        bool deprived = (b.ledger.rank2010[w] - 0.5) / nw < 0.5;
        b.ledger.effect[w] = (deprived && b.ledger.cea_mean[w] > 1.0) ? 1.0 : 0.0;
        break;
      }
      case TreatmentMode::random_assignment:
        b.ledger.effect[w] = treat_rng.uniform01() < cfg.treated_fraction ? 1.0 : 0.0;
        break;
      case TreatmentMode::graded:
        b.ledger.effect[w] = treat_rng.uniform(-1.0, 1.0);
        break;
    }
  }
  b.ledger.inflow_factor.resize(nw);
  b.ledger.venue_factor.resize(nw);
  for (int w = 0; w < nw; ++w) {
    b.ledger.inflow_factor[w] = std::pow(1.0 + cfg.delta, b.ledger.effect[w]);
    b.ledger.venue_factor[w] =
        std::pow(1.0 + cfg.effective_venue_delta(), b.ledger.effect[w]);
    if (b.ledger.effect[w] > 0.0) b.ledger.treated.push_back(w);
  }

  // --- venues ----------------------------------------------------------------
  static const char* kCultural[] = {"Art Gallery", "Museum",      "Theater",
                                    "Library",     "Park",        "Stadium",
                                    "Music Venue", "Historic Site"};
  static const char* kOther[] = {"Cafe",   "Restaurant", "Grocery Store", "Office",
                                 "Bar",    "Gym",        "Hotel",         "Market"};
  static const char* kOtherParent[] = {"Food", "Food",         "Shop & Service",
                                       "Professional", "Nightlife Spot", "Shop & Service",
                                       "Travel & Transport", "Shop & Service"};
  Rng venue_rng(derive_seed(cfg.seed, 5));
  const double disp = cfg.venues_per_ward_dispersion;
  const double base_frac = 0.55, yearly_frac = 0.15;
  int venue_seq = 0;
  for (int w = 0; w < nw; ++w) {
    double mult = 1.0;
    if (disp > 0.0) {
      double shape = 1.0 / (disp * disp);
      mult = venue_rng.gamma(shape, 1.0 / shape);
    }
    auto place = [&](int created_year, std::int64_t lo, std::int64_t hi) {
      SynthVenue v;
      v.id = detail::pad_number("V", ++venue_seq, 6);
      // Stay clear of cell boundaries so containment is unambiguous.
      v.lat = b.wards[w].lat_lo + (0.02 + 0.96 * venue_rng.uniform01()) * cfg.cell_deg;
      v.lon = b.wards[w].lon_lo + (0.02 + 0.96 * venue_rng.uniform01()) * cfg.cell_deg;
      v.ward = w;
      v.cultural = venue_rng.uniform01() < cfg.cultural_fraction;
      v.created_at = lo + static_cast<std::int64_t>(venue_rng.uniform01() *
                                                    static_cast<double>(hi - lo));
      v.created_year = created_year;
      v.user_count = 1 + static_cast<std::int64_t>(std::exp(venue_rng.normal(2.0, 1.0)));
      std::size_t pick = static_cast<std::size_t>(venue_rng.uniform_index(8));
      if (v.cultural) {
        v.category = kCultural[pick];
        v.parent_category = "Arts & Entertainment";
      } else {
        v.category = kOther[pick];
        v.parent_category = kOtherParent[pick];
      }
      b.venues.push_back(std::move(v));
    };
    std::int64_t n_base = std::max<std::int64_t>(
        2, venue_rng.poisson(cfg.venues_per_ward_mean * base_frac * mult));
    std::int64_t pre_lo = utc_epoch(cfg.first_year - 3, 1, 1);
    std::int64_t pre_hi = utc_epoch(cfg.first_year, 1, 1);
    for (std::int64_t i = 0; i < n_base; ++i) place(cfg.first_year - 1, pre_lo, pre_hi);
    for (int t = 0; t < cfg.years; ++t) {
      double rate = cfg.venues_per_ward_mean * yearly_frac * mult *
                    std::pow(b.ledger.venue_factor[w], t);
      std::int64_t n_new = venue_rng.poisson(rate);
      int year = cfg.first_year + t;
      for (std::int64_t i = 0; i < n_new; ++i)
        place(year, utc_epoch(year, 1, 1), utc_epoch(year + 1, 1, 1));
    }
  }
  b.ledger.venues_emitted = b.venues.size();

  // --- transitions -------------------------------------------------------------
  // Destination probability factorizes as ward gravity x in-ward popularity:
  // p(venue) ~ user_count / (1 + distance^gamma) at ward-centre resolution.
  std::vector<LatLon> centre(nw);
  for (int w = 0; w < nw; ++w)
    centre[w] = {(b.wards[w].lat_lo + b.wards[w].lat_hi) / 2.0,
                 (b.wards[w].lon_lo + b.wards[w].lon_hi) / 2.0};
  std::vector<double> gravity(static_cast<std::size_t>(nw) * nw);
  for (int a = 0; a < nw; ++a)
    for (int c = 0; c < nw; ++c)
      gravity[static_cast<std::size_t>(a) * nw + c] =
          1.0 / (1.0 + std::pow(great_circle_km(centre[a], centre[c]),
                                cfg.gravity_exponent));

  b.ledger.transitions_emitted.assign(cfg.years, 0);
  b.transitions.reserve(static_cast<std::size_t>(cfg.transitions_per_year) * cfg.years);
  std::vector<std::vector<std::uint32_t>> ward_venues(nw);
  for (int t = 0; t < cfg.years; ++t) {
    const int year = cfg.first_year + t;
    Rng rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(t)));

    for (auto& list : ward_venues) list.clear();
    std::vector<std::uint32_t> avail;
    for (std::uint32_t v = 0; v < b.venues.size(); ++v)
      if (b.venues[v].created_year <= year) {
        avail.push_back(v);
        ward_venues[b.venues[v].ward].push_back(v);
      }
    if (avail.empty()) throw config_error("generate_city: no venues available in year");

    std::vector<double> origin_cum(avail.size());
    double run = 0.0;
    for (std::size_t i = 0; i < avail.size(); ++i) {
      run += static_cast<double>(b.venues[avail[i]].user_count);
      origin_cum[i] = run;
    }
    std::vector<std::vector<double>> venue_cum(nw);
    std::vector<double> ward_pop(nw, 0.0);
    for (int w = 0; w < nw; ++w) {
      double s = 0.0;
      venue_cum[w].resize(ward_venues[w].size());
      for (std::size_t i = 0; i < ward_venues[w].size(); ++i) {
        s += static_cast<double>(b.venues[ward_venues[w][i]].user_count);
        venue_cum[w][i] = s;
      }
      ward_pop[w] = s;
    }
    std::vector<double> boost(nw);
    for (int w = 0; w < nw; ++w)
      boost[w] = ward_pop[w] * std::pow(b.ledger.inflow_factor[w], t);
    std::vector<std::vector<double>> dest_cum(nw, std::vector<double>(nw, 0.0));
    for (int o = 0; o < nw; ++o) {
      double s = 0.0;
      for (int dst = 0; dst < nw; ++dst) {
        s += boost[dst] * gravity[static_cast<std::size_t>(o) * nw + dst];
        dest_cum[o][dst] = s;
      }
      if (s <= 0.0) throw config_error("generate_city: empty destination distribution");
    }

    const std::int64_t year_lo = utc_epoch(year, 1, 1);
    const std::int64_t year_hi = utc_epoch(year + 1, 1, 1);
    for (std::int64_t i = 0; i < cfg.transitions_per_year; ++i) {
      double u = rng.uniform01() * origin_cum.back();
      std::uint32_t origin = avail[detail::cum_search(origin_cum, u)];
      int oward = b.venues[origin].ward;
      double ud = rng.uniform01() * dest_cum[oward].back();
      int dward = static_cast<int>(detail::cum_search(dest_cum[oward], ud));
      const auto& wcum = venue_cum[dward];
      double uv = rng.uniform01() * wcum.back();
      std::uint32_t dest = ward_venues[dward][detail::cum_search(wcum, uv)];
      std::int64_t t0 =
          year_lo + static_cast<std::int64_t>(rng.uniform01() *
                                              static_cast<double>(year_hi - year_lo - 1));
      std::int64_t gap = 600 + static_cast<std::int64_t>(rng.uniform01() * 13800.0);
      b.transitions.push_back({origin, dest, t0, t0 + gap, year});
      ++b.ledger.transitions_emitted[t];
    }
  }

  // --- IMD 2015 -----------------------------------------------------------------
  Rng noise_rng(derive_seed(cfg.seed, 6));
  const double beta = cfg.score_effect_scale * cfg.delta;
  b.ledger.score2015.resize(nw);
  for (int w = 0; w < nw; ++w)
    b.ledger.score2015[w] = b.ledger.score2010[w] - beta * b.ledger.effect[w] +
                            (cfg.imd_noise > 0.0 ? noise_rng.normal(0.0, cfg.imd_noise) : 0.0);
  b.ledger.rank2015 = detail::rank_descending(b.ledger.score2015);
  b.ledger.delta_rank.resize(nw);
  for (int w = 0; w < nw; ++w)
    b.ledger.delta_rank[w] = b.ledger.rank2015[w] - b.ledger.rank2010[w];

  return b;
}

/// Writes the five pipeline input files plus ledger.json into `dir`.
inline void write_bundle(SynthBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  b.dir = dir;
  b.venues_path = dir + "/venues.csv";
  b.transitions_path = dir + "/transitions.csv";
  b.wards_path = dir + "/wards.geojson";
  b.expenditure_path = dir + "/expenditure.csv";
  b.imd_path = dir + "/imd.csv";
  b.ledger_path = dir + "/ledger.json";

  {
    CsvWriter out(b.venues_path);
    out.raw_line("id,lat,lon,category,parent_category,is_cultural,created_at,user_count");
    for (const auto& v : b.venues)
      out.row({v.id, format_double(v.lat), format_double(v.lon), v.category,
               v.parent_category, v.cultural ? "true" : "false", format_iso8601(v.created_at),
               std::to_string(v.user_count)});
  }
  {
    CsvWriter out(b.transitions_path);
    out.raw_line("origin_venue,dest_venue,t_origin,t_dest");
    std::string line;
    for (const auto& tr : b.transitions) {
      line.clear();
      line += b.venues[tr.origin].id;
      line += ',';
      line += b.venues[tr.dest].id;
      line += ',';
      line += format_iso8601(tr.t0);
      line += ',';
      line += format_iso8601(tr.t1);
      out.raw_line(line);
    }
  }
  {
    nlohmann::json fc;
    fc["type"] = "FeatureCollection";
    auto& features = fc["features"] = nlohmann::json::array();
    for (const auto& w : b.wards) {
      nlohmann::json f;
      f["type"] = "Feature";
      f["properties"] = {{"ward_code", w.code},
                         {"borough_code", w.borough},
                         {"sub_region", w.sub_region},
                         {"area_km2", w.area_km2},
                         {"population", w.population}};
      f["geometry"]["type"] = "Polygon";
      f["geometry"]["coordinates"] = nlohmann::json::array(
          {nlohmann::json::array({nlohmann::json::array({w.lon_lo, w.lat_lo}),
                                  nlohmann::json::array({w.lon_hi, w.lat_lo}),
                                  nlohmann::json::array({w.lon_hi, w.lat_hi}),
                                  nlohmann::json::array({w.lon_lo, w.lat_hi}),
                                  nlohmann::json::array({w.lon_lo, w.lat_lo})})});
      features.push_back(std::move(f));
    }
    std::ofstream out(b.wards_path, std::ios::binary);
    out << fc.dump(1) << '\n';
  }
  {
    CsvWriter out(b.expenditure_path);
    out.raw_line("borough_code,fiscal_year,category,amount");
    for (std::size_t t = 0; t < b.fiscal_years.size(); ++t)
      for (std::size_t bi = 0; bi < b.borough_codes.size(); ++bi)
        for (int k = 0; k < kExpenditureCategoryCount; ++k)
          out.row({b.borough_codes[bi], b.fiscal_years[t],
                   to_string(static_cast<ExpenditureCategory>(k)),
                   format_double(b.expenditure[t][bi][k])});
  }
  {
    CsvWriter out(b.imd_path);
    out.raw_line("ward_code,edition,score,rank");
    for (std::size_t w = 0; w < b.wards.size(); ++w)
      out.row({b.wards[w].code, "2010", format_double(b.ledger.score2010[w]),
               std::to_string(b.ledger.rank2010[w])});
    for (std::size_t w = 0; w < b.wards.size(); ++w)
      out.row({b.wards[w].code, "2015", format_double(b.ledger.score2015[w]),
               std::to_string(b.ledger.rank2015[w])});
  }
  {
    nlohmann::json j;
    j["seed"] = b.config.seed;
    j["delta"] = b.config.delta;
    j["venue_delta"] = b.config.effective_venue_delta();
    j["imd_noise"] = b.config.imd_noise;
    j["venues_emitted"] = b.ledger.venues_emitted;
    j["transitions_emitted"] = b.ledger.transitions_emitted;
    j["treated"] = b.ledger.treated;
    j["effect"] = b.ledger.effect;
    j["inflow_factor"] = b.ledger.inflow_factor;
    j["venue_factor"] = b.ledger.venue_factor;
    j["rank2010"] = b.ledger.rank2010;
    j["rank2015"] = b.ledger.rank2015;
    j["delta_rank"] = b.ledger.delta_rank;
    j["cea_mean"] = b.ledger.cea_mean;
    std::ofstream out(b.ledger_path, std::ios::binary);
    out << j.dump(1) << '\n';
  }
}

/// Naive recomputation of the whole metrics panel straight from the bundle:
/// quadratic scans, literal formula transcription, none of the pipeline's
/// parsing, indexing, or graph machinery.
inline WardMetricsPanel oracle_ward_metrics(const SynthBundle& b) {
  const int nw = static_cast<int>(b.wards.size());
  const int ny = b.config.years;
  WardMetricsPanel panel;
  panel.ward_codes.resize(nw);
  panel.sub_region.resize(nw);
  panel.area_km2.resize(nw);
  panel.distance_km.resize(nw);
  LatLon city_centre{b.config.centre_lat, b.config.centre_lon};
  for (int w = 0; w < nw; ++w) {
    panel.ward_codes[w] = b.wards[w].code;
    panel.sub_region[w] = b.wards[w].sub_region;
    panel.area_km2[w] = b.wards[w].area_km2;
    LatLon c{(b.wards[w].lat_lo + b.wards[w].lat_hi) / 2.0,
             (b.wards[w].lon_lo + b.wards[w].lon_hi) / 2.0};
    panel.distance_km[w] = great_circle_km(c, city_centre);
  }
  panel.rows.assign(ny, std::vector<WardPeriodRow>(nw));

  std::map<std::string, int> borough_index;
  for (std::size_t i = 0; i < b.borough_codes.size(); ++i)
    borough_index[b.borough_codes[i]] = static_cast<int>(i);
  std::vector<int> wards_in_borough(b.borough_codes.size(), 0);
  std::vector<double> borough_pop(b.borough_codes.size(), 0.0);
  for (const auto& w : b.wards) {
    ++wards_in_borough[borough_index[w.borough]];
    borough_pop[borough_index[w.borough]] += static_cast<double>(w.population);
  }

  for (int t = 0; t < ny; ++t) {
    const int year = b.config.first_year + t;
    panel.years.push_back(year);
    auto& rows = panel.rows[t];

    std::set<std::uint32_t> node_set;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> edge_count;
    for (const auto& tr : b.transitions) {
      if (tr.year != year) continue;
      node_set.insert(tr.origin);
      node_set.insert(tr.dest);
      ++edge_count[{tr.origin, tr.dest}];
      int wo = b.venues[tr.origin].ward;
      int wd = b.venues[tr.dest].ward;
      if (wo != wd) {
        rows[wo].oc += 1;
        rows[wd].ic += 1;
      }
    }
    for (std::uint32_t v : node_set) ++rows[b.venues[v].ward].n_nodes;

    // Local clustering by direct neighbor-pair enumeration.
    std::map<std::uint32_t, std::set<std::uint32_t>> neighbors;
    for (const auto& [e, cnt] : edge_count) {
      if (e.first == e.second) continue;
      neighbors[e.first].insert(e.second);
      neighbors[e.second].insert(e.first);
    }
    std::map<std::uint32_t, double> clustering;
    for (std::uint32_t v : node_set) {
      const auto it = neighbors.find(v);
      std::size_t k = it == neighbors.end() ? 0 : it->second.size();
      if (k < 2) {
        clustering[v] = 0.0;
        continue;
      }
      std::uint64_t links = 0;
      for (std::uint32_t u1 : it->second)
        for (std::uint32_t u2 : it->second)
          if (u1 != u2 && edge_count.count({u1, u2})) ++links;
      clustering[v] = static_cast<double>(links) /
                      (static_cast<double>(k) * static_cast<double>(k - 1));
    }
    std::vector<double> clust_sum(nw, 0.0);
    for (std::uint32_t v : node_set) clust_sum[b.venues[v].ward] += clustering[v];

    std::vector<double> cv(nw, 0.0), tv(nw, 0.0);
    for (const auto& v : b.venues) {
      if (v.created_year == year) ++rows[v.ward].vc;
      if (v.created_year <= year) {
        tv[v.ward] += 1.0;
        if (v.cultural) cv[v.ward] += 1.0;
      }
    }
    double sum_cv = 0.0, sum_tv = 0.0;
    for (int w = 0; w < nw; ++w) {
      sum_cv += cv[w];
      sum_tv += tv[w];
    }

    double sum_ce = 0.0, sum_te = 0.0;
    std::vector<double> ward_ce(nw, 0.0), ward_te(nw, 0.0);
    for (int w = 0; w < nw; ++w) {
      int bi = borough_index[b.wards[w].borough];
      const auto& cell = b.expenditure[t][bi];
      double ce = cell[0] + cell[1] + cell[2] + cell[3] + cell[4];
      ward_ce[w] = ce / wards_in_borough[bi];
      ward_te[w] =
          cell[static_cast<int>(ExpenditureCategory::total_services)] / wards_in_borough[bi];
      sum_ce += ward_ce[w];
      sum_te += ward_te[w];
    }

    for (int w = 0; w < nw; ++w) {
      WardPeriodRow& r = rows[w];
      if (r.oc > 0)
        r.ior = static_cast<double>(r.ic) / static_cast<double>(r.oc);
      r.acc = r.n_nodes == 0 ? 0.0 : clust_sum[w] / static_cast<double>(r.n_nodes);
      r.vcd = static_cast<double>(r.vc) / b.wards[w].area_km2;
      if (tv[w] > 0.0 && sum_cv > 0.0)
        r.cva = (cv[w] / tv[w]) / (sum_cv / sum_tv);
      int bi = borough_index[b.wards[w].borough];
      const auto& cell = b.expenditure[t][bi];
      r.ce = ward_ce[w];
      r.te = ward_te[w];
      r.cea = (ward_ce[w] / ward_te[w]) / (sum_ce / sum_te);
      double pc = borough_pop[bi] / wards_in_borough[bi];
      r.ceop = cell[static_cast<int>(ExpenditureCategory::open_spaces)] /
               wards_in_borough[bi] / pc;
      r.cech = cell[static_cast<int>(ExpenditureCategory::culture_heritage)] /
               wards_in_borough[bi] / pc;
      r.cels = cell[static_cast<int>(ExpenditureCategory::library_service)] /
               wards_in_borough[bi] / pc;
      r.cers = cell[static_cast<int>(ExpenditureCategory::recreation_sport)] /
               wards_in_borough[bi] / pc;
      r.cet =
          cell[static_cast<int>(ExpenditureCategory::tourism)] / wards_in_borough[bi] / pc;
    }
  }

  for (int t = 1; t < ny; ++t) {
    for (int w = 0; w < nw; ++w) {
      const WardPeriodRow& prev = panel.rows[t - 1][w];
      WardPeriodRow& cur = panel.rows[t][w];
      auto ratio = [](double a, double bb) -> std::optional<double> {
        if (a <= 0.0) return std::nullopt;
        return bb / a;
      };
      cur.grn = ratio(static_cast<double>(prev.n_nodes), static_cast<double>(cur.n_nodes));
      cur.gri = ratio(static_cast<double>(prev.ic), static_cast<double>(cur.ic));
      cur.gro = ratio(static_cast<double>(prev.oc), static_cast<double>(cur.oc));
      if (prev.ior && cur.ior && *prev.ior > 0.0) cur.grior = *cur.ior / *prev.ior;
      cur.gracc = ratio(prev.acc, cur.acc);
      cur.grvc = ratio(static_cast<double>(prev.vc), static_cast<double>(cur.vc));
    }
  }
  return panel;
}

/// Class counts straight from the ground-truth ledger.
struct LabelCounts {
  std::size_t improved = 0;
  std::size_t worsened = 0;
};

inline LabelCounts oracle_label_counts(const SynthBundle& b, int threshold) {
  LabelCounts c;
  for (int d : b.ledger.delta_rank) {
    if (std::abs(d) <= threshold) continue;
    if (d > 0) ++c.improved;
    else ++c.worsened;
  }
  return c;
}

}  // namespace wardflow::synth
