#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wardflow/metrics.hpp"
#include "wardflow/types.hpp"

namespace wardflow {

/// The four analysis groups crossing initial deprivation with cultural
/// spending advantage:
///   G1 less deprived / CEA > 1      G2 more deprived / CEA <= 1
///   G3 more deprived / CEA > 1      G4 less deprived / CEA <= 1
enum class WardGroup { G1 = 1, G2 = 2, G3 = 3, G4 = 4 };

inline const char* to_string(WardGroup g) {
  switch (g) {
    case WardGroup::G1: return "G1";
    case WardGroup::G2: return "G2";
    case WardGroup::G3: return "G3";
    case WardGroup::G4: return "G4";
  }
  return "?";
}

/// Rank percentile below 0.5 means more deprived (rank 1 = most deprived);
/// CEA exactly 1 falls on the less-advantaged side.
inline WardGroup assign_group(double imd_rank_2010_percentile, double cea_mean) {
  bool more_deprived = imd_rank_2010_percentile < 0.5;
  bool advantaged = cea_mean > 1.0;
  if (more_deprived) return advantaged ? WardGroup::G3 : WardGroup::G2;
  return advantaged ? WardGroup::G1 : WardGroup::G4;
}

/// The deprivation threshold statistic. median_rank: more deprived iff
/// rank < (N+1)/2. mean_score: more deprived iff score above the mean score.
enum class DeprivationStatistic { median_rank, mean_score };

struct CohortAssignment {
  std::vector<std::optional<WardGroup>> group;  // per ward index
  std::array<std::size_t, 4> counts{0, 0, 0, 0};
  std::size_t retained = 0;
  std::map<std::string, std::size_t> exclusions;

  std::size_t count(WardGroup g) const { return counts[static_cast<int>(g) - 1]; }
};

/// Assigns every ward to a group from its IMD-2010 standing and its mean CEA
/// across the panel periods. Wards missing either input are excluded and
/// counted.
inline CohortAssignment build_cohorts(const WardTable& wards, const ImdTable& imd,
                                      const WardMetricsPanel& panel,
                                      DeprivationStatistic stat =
                                          DeprivationStatistic::median_rank) {
  auto edition = imd.by_edition.find(2010);
  if (edition == imd.by_edition.end()) throw data_error("build_cohorts: no IMD 2010 edition");
  const double n_ranked = static_cast<double>(edition->second.size());

  double mean_score = 0.0;
  if (stat == DeprivationStatistic::mean_score) {
    for (const auto& [code, idx] : edition->second) mean_score += imd.records[idx].score;
    mean_score /= n_ranked;
  }

  CohortAssignment out;
  out.group.assign(wards.size(), std::nullopt);
  for (std::uint32_t w = 0; w < wards.size(); ++w) {
    const DeprivationRecord* rec = imd.find(2010, wards[w].ward_code);
    if (!rec) {
      ++out.exclusions["missing IMD 2010"];
      continue;
    }
    double cea_sum = 0.0;
    int cea_n = 0;
    for (std::size_t yi = 0; yi < panel.years.size(); ++yi)
      if (auto v = panel.rows[yi][w].cea) {
        cea_sum += *v;
        ++cea_n;
      }
    if (cea_n == 0) {
      ++out.exclusions["missing CEA"];
      continue;
    }
    double cea_mean = cea_sum / cea_n;
    WardGroup g;
    if (stat == DeprivationStatistic::median_rank) {
      double pct = (static_cast<double>(rec->rank) - 0.5) / n_ranked;
      g = assign_group(pct, cea_mean);
    } else {
      bool more_deprived = rec->score > mean_score;
      bool advantaged = cea_mean > 1.0;
      g = more_deprived ? (advantaged ? WardGroup::G3 : WardGroup::G2)
                        : (advantaged ? WardGroup::G1 : WardGroup::G4);
    }
    out.group[w] = g;
    ++out.counts[static_cast<int>(g) - 1];
    ++out.retained;
  }
  return out;
}

}  // namespace wardflow
