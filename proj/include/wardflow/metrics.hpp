#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wardflow/csv.hpp"
#include "wardflow/geo.hpp"
#include "wardflow/graph.hpp"
#include "wardflow/ingest.hpp"
#include "wardflow/isotime.hpp"
#include "wardflow/types.hpp"

namespace wardflow {

/// (IC, OC): summed weights of transitions crossing the ward boundary.
/// Intra-ward edges and edges with an unassigned endpoint are excluded;
/// weights are transition counts, so this measures flow volume.
inline std::pair<std::uint64_t, std::uint64_t> ward_centralities(const SnapshotGraph& g,
                                                                 const VenueWardIndex& index,
                                                                 std::uint32_t ward) {
  std::uint64_t ic = 0, oc = 0;
  const auto w = static_cast<std::int32_t>(ward);
  for (const auto& e : g.edges()) {
    std::int32_t wo = index.ward_of[e.origin];
    std::int32_t wd = index.ward_of[e.dest];
    if (wo < 0 || wd < 0 || wo == wd) continue;
    if (wd == w) ic += e.weight;
    if (wo == w) oc += e.weight;
  }
  return {ic, oc};
}

/// IC/OC ratio; missing when there is no out-flow.
inline std::optional<double> ior(double ic, double oc) {
  if (oc <= 0.0) return std::nullopt;
  return ic / oc;
}

/// Mean whole-graph local clustering over the graph nodes assigned to the
/// ward; 0 when the ward has no nodes in the snapshot.
inline double ward_acc(const SnapshotGraph& g, const VenueWardIndex& index,
                       std::uint32_t ward) {
  auto clustering = g.all_clustering();
  double sum = 0.0;
  std::size_t count = 0;
  const auto& nodes = g.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (index.ward_of[nodes[i]] == static_cast<std::int32_t>(ward)) {
      sum += clustering[i];
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

/// Venues created in the ward during calendar year `year` and the same per
/// square kilometre.
inline std::pair<std::int64_t, double> venue_creation(const VenueTable& venues,
                                                      const VenueWardIndex& index, int year,
                                                      std::uint32_t ward,
                                                      const Ward& ward_rec) {
  std::int64_t lo = utc_epoch(year, 1, 1);
  std::int64_t hi = utc_epoch(year + 1, 1, 1);
  std::int64_t vc = 0;
  for (std::uint32_t v = 0; v < venues.size(); ++v)
    if (index.ward_of[v] == static_cast<std::int32_t>(ward) && venues[v].created_at >= lo &&
        venues[v].created_at < hi)
      ++vc;
  return {vc, static_cast<double>(vc) / ward_rec.area_km2};
}

/// curr/prev; missing unless both inputs are present and prev > 0.
inline std::optional<double> growth_rate(std::optional<double> prev,
                                         std::optional<double> curr) {
  if (!prev || !curr || *prev <= 0.0) return std::nullopt;
  return *curr / *prev;
}

/// LQ_i^j = (q_ij / rowsum_i) / (colsum_j / grand). Entries in a zero row or
/// zero column are missing; everything else is computed.
struct LqMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::optional<double>> values;  // row-major

  std::optional<double> at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

inline LqMatrix location_quotient(std::size_t rows, std::size_t cols,
                                  const std::vector<double>& q) {
  if (q.size() != rows * cols) throw config_error("location_quotient: shape mismatch");
  LqMatrix out;
  out.rows = rows;
  out.cols = cols;
  out.values.assign(rows * cols, std::nullopt);
  std::vector<double> rowsum(rows, 0.0), colsum(cols, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double v = q[i * cols + j];
      rowsum[i] += v;
      colsum[j] += v;
      grand += v;
    }
  if (grand <= 0.0) return out;
  for (std::size_t i = 0; i < rows; ++i) {
    if (rowsum[i] <= 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      if (colsum[j] <= 0.0) continue;
      out.values[i * cols + j] = (q[i * cols + j] / rowsum[i]) / (colsum[j] / grand);
    }
  }
  return out;
}

/// CEA_i = (CE_i/TE_i) / (sum CE / sum TE); missing where TE_i = 0.
inline std::vector<std::optional<double>> cultural_expenditure_advantage(
    std::span<const double> ce, std::span<const double> te) {
  if (ce.size() != te.size())
    throw config_error("cultural_expenditure_advantage: size mismatch");
  std::vector<std::optional<double>> out(ce.size());
  double sum_ce = 0.0, sum_te = 0.0;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    sum_ce += ce[i];
    sum_te += te[i];
  }
  if (sum_ce <= 0.0 || sum_te <= 0.0) return out;
  double city = sum_ce / sum_te;
  for (std::size_t i = 0; i < ce.size(); ++i)
    if (te[i] > 0.0) out[i] = (ce[i] / te[i]) / city;
  return out;
}

/// CVA_i = (CV_i/TV_i) / (sum CV / sum TV); missing where TV_i = 0.
inline std::vector<std::optional<double>> cultural_venue_advantage(std::span<const double> cv,
                                                                   std::span<const double> tv) {
  if (cv.size() != tv.size()) throw config_error("cultural_venue_advantage: size mismatch");
  std::vector<std::optional<double>> out(cv.size());
  double sum_cv = 0.0, sum_tv = 0.0;
  for (std::size_t i = 0; i < cv.size(); ++i) {
    sum_cv += cv[i];
    sum_tv += tv[i];
  }
  if (sum_cv <= 0.0 || sum_tv <= 0.0) return out;
  double city = sum_cv / sum_tv;
  for (std::size_t i = 0; i < cv.size(); ++i)
    if (tv[i] > 0.0) out[i] = (cv[i] / tv[i]) / city;
  return out;
}

struct WardPeriodRow {
  std::int64_t n_nodes = 0;
  std::uint64_t ic = 0, oc = 0;
  std::optional<double> ior;
  double acc = 0.0;
  std::int64_t vc = 0;
  double vcd = 0.0;
  std::optional<double> cva;
  std::optional<double> ce, te, cea, ceop, cech, cels, cers, cet;
  std::optional<double> grn, gri, gro, grior, gracc, grvc;
};

/// Per-(ward, period) table of every analysis variable. Wards keep a row in
/// every period; absence shows up as zeros/missing values, never as a
/// dropped row.
struct WardMetricsPanel {
  std::vector<int> years;  // contiguous, ascending
  std::vector<std::string> ward_codes;
  std::vector<std::string> sub_region;
  std::vector<double> area_km2;
  std::vector<double> distance_km;
  std::vector<std::vector<WardPeriodRow>> rows;  // [year index][ward index]

  const WardPeriodRow& at(std::size_t ward, std::size_t year_idx) const {
    return rows[year_idx][ward];
  }

  std::optional<std::size_t> year_index(int year) const {
    for (std::size_t i = 0; i < years.size(); ++i)
      if (years[i] == year) return i;
    return std::nullopt;
  }

  /// Variable lookup by panel column name (ANOVA and reports are configured
  /// with names). Unknown name -> config_error.
  std::optional<double> value(std::size_t ward, std::size_t year_idx,
                              const std::string& name) const {
    const WardPeriodRow& r = rows[year_idx][ward];
    if (name == "N") return static_cast<double>(r.n_nodes);
    if (name == "IC") return static_cast<double>(r.ic);
    if (name == "OC") return static_cast<double>(r.oc);
    if (name == "IOR") return r.ior;
    if (name == "ACC") return r.acc;
    if (name == "VC") return static_cast<double>(r.vc);
    if (name == "VCD") return r.vcd;
    if (name == "CVA") return r.cva;
    if (name == "CE") return r.ce;
    if (name == "CEA") return r.cea;
    if (name == "CEOP") return r.ceop;
    if (name == "CECH") return r.cech;
    if (name == "CELS") return r.cels;
    if (name == "CERS") return r.cers;
    if (name == "CET") return r.cet;
    if (name == "GRN") return r.grn;
    if (name == "GRI") return r.gri;
    if (name == "GRO") return r.gro;
    if (name == "GRIOR") return r.grior;
    if (name == "GRACC") return r.gracc;
    if (name == "GRVC") return r.grvc;
    throw config_error("unknown panel variable: " + name);
  }
};

/// Assembles the full panel from yearly snapshots. `graphs` must cover
/// consecutive calendar years in ascending order. Growth rows come from
/// consecutive periods; with a single snapshot they are all missing.
inline WardMetricsPanel build_metrics_panel(const std::vector<SnapshotGraph>& graphs,
                                            const VenueWardIndex& index,
                                            const VenueTable& venues,
                                            const ApportionedExpenditure& expenditure,
                                            const PeriodMap& periods, const WardTable& wards,
                                            LatLon centre) {
  if (graphs.empty()) throw config_error("build_metrics_panel: no snapshots");
  for (std::size_t i = 1; i < graphs.size(); ++i)
    if (graphs[i].year() != graphs[i - 1].year() + 1)
      throw config_error("build_metrics_panel: snapshot years not consecutive");

  const std::size_t nw = wards.size();
  WardMetricsPanel panel;
  for (const auto& g : graphs) panel.years.push_back(g.year());
  panel.ward_codes.resize(nw);
  panel.sub_region.resize(nw);
  panel.area_km2.resize(nw);
  panel.distance_km.resize(nw);
  for (std::uint32_t w = 0; w < nw; ++w) {
    panel.ward_codes[w] = wards[w].ward_code;
    panel.sub_region[w] = wards[w].sub_region;
    panel.area_km2[w] = wards[w].area_km2;
    panel.distance_km[w] = ward_centroid_distance(wards[w], centre);
  }
  panel.rows.assign(graphs.size(), std::vector<WardPeriodRow>(nw));

  for (std::size_t yi = 0; yi < graphs.size(); ++yi) {
    const SnapshotGraph& g = graphs[yi];
    const int year = g.year();
    auto& rows = panel.rows[yi];

    // Node counts and clustering sums per ward, one pass over the nodes.
    auto clustering = g.all_clustering();
    std::vector<std::int64_t> node_count(nw, 0);
    std::vector<double> clust_sum(nw, 0.0);
    const auto& nodes = g.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::int32_t w = index.ward_of[nodes[i]];
      if (w < 0) continue;
      ++node_count[w];
      clust_sum[w] += clustering[i];
    }

    // Cross-ward flows, one pass over the edges.
    std::vector<std::uint64_t> ic(nw, 0), oc(nw, 0);
    for (const auto& e : g.edges()) {
      std::int32_t wo = index.ward_of[e.origin];
      std::int32_t wd = index.ward_of[e.dest];
      if (wo < 0 || wd < 0 || wo == wd) continue;
      oc[wo] += e.weight;
      ic[wd] += e.weight;
    }

    // Venue creation within the year; venue stock up to the end of the year.
    std::int64_t year_lo = utc_epoch(year, 1, 1);
    std::int64_t year_hi = utc_epoch(year + 1, 1, 1);
    std::vector<std::int64_t> vc(nw, 0);
    std::vector<double> cultural_stock(nw, 0.0), total_stock(nw, 0.0);
    for (std::uint32_t v = 0; v < venues.size(); ++v) {
      std::int32_t w = index.ward_of[v];
      if (w < 0) continue;
      std::int64_t created = venues[v].created_at;
      if (created >= year_lo && created < year_hi) ++vc[w];
      if (created < year_hi) {
        total_stock[w] += 1.0;
        if (venues[v].is_cultural) cultural_stock[w] += 1.0;
      }
    }
    auto cva = cultural_venue_advantage(cultural_stock, total_stock);

    for (std::uint32_t w = 0; w < nw; ++w) {
      WardPeriodRow& r = rows[w];
      r.n_nodes = node_count[w];
      r.ic = ic[w];
      r.oc = oc[w];
      r.ior = ior(static_cast<double>(ic[w]), static_cast<double>(oc[w]));
      r.acc = node_count[w] == 0 ? 0.0 : clust_sum[w] / static_cast<double>(node_count[w]);
      r.vc = vc[w];
      r.vcd = static_cast<double>(vc[w]) / wards[w].area_km2;
      r.cva = cva[w];
    }

    // Expenditure for the fiscal year aligned to this calendar year.
    if (auto fiscal = periods.fiscal_year(year)) {
      if (auto ei = expenditure.year_index(*fiscal)) {
        const auto& we = expenditure.by_year[*ei];
        std::vector<double> ce_v(nw, 0.0), te_v(nw, 0.0);
        for (std::uint32_t w = 0; w < nw; ++w) {
          ce_v[w] = we[w].ce;
          te_v[w] = we[w].te;
        }
        auto cea = cultural_expenditure_advantage(ce_v, te_v);
        for (std::uint32_t w = 0; w < nw; ++w) {
          WardPeriodRow& r = rows[w];
          r.ce = we[w].ce;
          r.te = we[w].te;
          r.cea = cea[w];
          r.ceop = we[w].ceop;
          r.cech = we[w].cech;
          r.cels = we[w].cels;
          r.cers = we[w].cers;
          r.cet = we[w].cet;
        }
      }
    }
  }

  // Growth rows from consecutive periods.
  for (std::size_t yi = 1; yi < panel.years.size(); ++yi) {
    for (std::uint32_t w = 0; w < nw; ++w) {
      const WardPeriodRow& prev = panel.rows[yi - 1][w];
      WardPeriodRow& cur = panel.rows[yi][w];
      auto num = [](double v) { return std::optional<double>(v); };
      cur.grn = growth_rate(num(static_cast<double>(prev.n_nodes)),
                            num(static_cast<double>(cur.n_nodes)));
      cur.gri = growth_rate(num(static_cast<double>(prev.ic)),
                            num(static_cast<double>(cur.ic)));
      cur.gro = growth_rate(num(static_cast<double>(prev.oc)),
                            num(static_cast<double>(cur.oc)));
      cur.grior = growth_rate(prev.ior, cur.ior);
      cur.gracc = growth_rate(num(prev.acc), num(cur.acc));
      cur.grvc = growth_rate(num(static_cast<double>(prev.vc)),
                             num(static_cast<double>(cur.vc)));
    }
  }
  return panel;
}

/// One row per (ward_code, t); missing values are empty fields.
inline void write_panel_csv(const WardMetricsPanel& panel, const std::string& path) {
  CsvWriter out(path);
  out.raw_line(
      "ward_code,t,sub_region,area_km2,distance_km,N,IC,OC,IOR,ACC,VC,VCD,CVA,CE,CEA,CEOP,"
      "CECH,CELS,CERS,CET,GRN,GRI,GRO,GRIOR,GRACC,GRVC");
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (std::size_t w = 0; w < panel.ward_codes.size(); ++w) {
    for (std::size_t yi = 0; yi < panel.years.size(); ++yi) {
      const WardPeriodRow& r = panel.rows[yi][w];
      out.row({panel.ward_codes[w], std::to_string(panel.years[yi]), panel.sub_region[w],
               format_double(panel.area_km2[w]), format_double(panel.distance_km[w]),
               std::to_string(r.n_nodes), std::to_string(r.ic), std::to_string(r.oc),
               opt(r.ior), format_double(r.acc), std::to_string(r.vc), format_double(r.vcd),
               opt(r.cva), opt(r.ce), opt(r.cea), opt(r.ceop), opt(r.cech), opt(r.cels),
               opt(r.cers), opt(r.cet), opt(r.grn), opt(r.gri), opt(r.gro), opt(r.grior),
               opt(r.gracc), opt(r.grvc)});
    }
  }
}

}  // namespace wardflow
