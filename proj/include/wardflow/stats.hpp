#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wardflow/types.hpp"

namespace wardflow::stats {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the incomplete beta (modified Lentz).
inline double incomplete_beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-12;
  constexpr double kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b).
inline double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * incomplete_beta_cf(a, b, x) / a;
  return 1.0 - bt * incomplete_beta_cf(b, a, 1.0 - x) / b;
}

/// Upper tail of the F distribution: P(F_{df1,df2} > f).
inline double f_pvalue(double f, double df1, double df2) {
  if (!std::isfinite(f)) throw data_error("f_pvalue: non-finite F statistic");
  if (df1 < 1.0 || df2 < 1.0) throw data_error("f_pvalue: degrees of freedom must be >= 1");
  if (f <= 0.0) return 1.0;
  double x = df2 / (df2 + df1 * f);
  double p = reg_incomplete_beta(df2 / 2.0, df1 / 2.0, x);
  return std::clamp(p, 0.0, 1.0);
}

/// Two-sided p for a Student t statistic.
inline double student_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  double x = df / (df + t * t);
  return std::clamp(reg_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

struct AnovaResult {
  std::string effect;
  double f = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p = 1.0;
  bool degenerate = false;  // zero error variance with a real effect
};

/// Independent one-way ANOVA. Requires >= 2 groups with >= 2 observations
/// each. Zero within-variance with equal means gives F = 0; with unequal
/// means the result is flagged degenerate with p = 0.
inline AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw data_error("one_way_anova: need at least 2 groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw data_error("one_way_anova: every group needs >= 2 observations");
    for (double v : g) {
      grand += v;
      ++n;
    }
  }
  grand /= static_cast<double>(n);
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ss_within += (v - mean) * (v - mean);
  }
  AnovaResult r;
  r.effect = "group";
  r.df1 = static_cast<int>(groups.size()) - 1;
  r.df2 = static_cast<int>(n - groups.size());
  double ms_between = ss_between / r.df1;
  double ms_within = ss_within / r.df2;
  if (ms_within <= 0.0) {
    if (ss_between <= 0.0) {
      r.f = 0.0;
      r.p = 1.0;
    } else {
      r.f = std::numeric_limits<double>::infinity();
      r.p = 0.0;
      r.degenerate = true;
    }
    return r;
  }
  r.f = ms_between / ms_within;
  r.p = f_pvalue(r.f, r.df1, r.df2);
  return r;
}

/// One ward-year measurement for the repeated-measures design.
struct PanelObservation {
  std::string ward_code;
  int group = 0;  // 1-based group label
  int year = 0;
  double value = 0.0;
};

struct MixedAnovaResult {
  AnovaResult group;        // between-subject
  AnovaResult time;         // within-subject
  AnovaResult interaction;  // group x time
  double ss_group = 0.0, ss_subjects_within = 0.0;
  double ss_time = 0.0, ss_interaction = 0.0, ss_error = 0.0, ss_total = 0.0;
};

namespace detail {

struct MixedLayout {
  std::vector<std::string> wards;       // subject order
  std::vector<int> ward_group;          // subject -> group index (0-based)
  std::vector<int> years;               // ascending
  std::vector<int> group_labels;        // ascending original labels
  std::vector<std::vector<double>> y;   // [subject][time]
};

inline MixedLayout layout_panel(const std::vector<PanelObservation>& panel) {
  std::set<int> year_set;
  for (const auto& o : panel) year_set.insert(o.year);
  std::vector<int> years(year_set.begin(), year_set.end());

  std::map<std::string, std::map<int, double>> by_ward;
  std::map<std::string, int> group_of;
  for (const auto& o : panel) {
    auto [it, inserted] = by_ward[o.ward_code].emplace(o.year, o.value);
    if (!inserted)
      throw data_error("panel has duplicate observation for ward " + o.ward_code + " year " +
                       std::to_string(o.year));
    auto [git, ginserted] = group_of.emplace(o.ward_code, o.group);
    if (!ginserted && git->second != o.group)
      throw data_error("ward " + o.ward_code + " appears in two groups");
  }

  std::string offenders;
  for (const auto& [ward, series] : by_ward)
    if (series.size() != years.size()) offenders += (offenders.empty() ? "" : ", ") + ward;
  if (!offenders.empty())
    throw data_error("unbalanced panel, wards missing years: " + offenders);

  std::set<int> glabels;
  for (const auto& [w, g] : group_of) glabels.insert(g);

  MixedLayout l;
  l.years = years;
  l.group_labels.assign(glabels.begin(), glabels.end());
  for (const auto& [ward, series] : by_ward) {
    l.wards.push_back(ward);
    int glabel = group_of[ward];
    l.ward_group.push_back(static_cast<int>(
        std::lower_bound(l.group_labels.begin(), l.group_labels.end(), glabel) -
        l.group_labels.begin()));
    std::vector<double> row;
    for (int yr : years) row.push_back(series.at(yr));
    l.y.push_back(std::move(row));
  }
  return l;
}

}  // namespace detail

/// Factorial repeated-measures (split-plot) ANOVA: between-subject factor
/// group, within-subject factor time, no sphericity correction. The panel
/// must be balanced in time; group sizes may differ.
inline MixedAnovaResult mixed_anova(const std::vector<PanelObservation>& panel) {
  auto l = detail::layout_panel(panel);
  const std::size_t n = l.wards.size();
  const std::size_t g = l.group_labels.size();
  const std::size_t t = l.years.size();
  if (g < 2) throw data_error("mixed_anova: need at least 2 groups");
  if (t < 2) throw data_error("mixed_anova: need at least 2 time points");
  if (n <= g) throw data_error("mixed_anova: need more subjects than groups");

  std::vector<double> subj_mean(n, 0.0), time_mean(t, 0.0), group_mean(g, 0.0);
  std::vector<std::vector<double>> cell_mean(g, std::vector<double>(t, 0.0));
  std::vector<std::size_t> group_n(g, 0);
  double grand = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    ++group_n[l.ward_group[s]];
    for (std::size_t k = 0; k < t; ++k) {
      double v = l.y[s][k];
      subj_mean[s] += v;
      time_mean[k] += v;
      group_mean[l.ward_group[s]] += v;
      cell_mean[l.ward_group[s]][k] += v;
      grand += v;
    }
  }
  for (std::size_t s = 0; s < n; ++s) subj_mean[s] /= static_cast<double>(t);
  for (std::size_t k = 0; k < t; ++k) time_mean[k] /= static_cast<double>(n);
  for (std::size_t gi = 0; gi < g; ++gi) {
    group_mean[gi] /= static_cast<double>(group_n[gi] * t);
    for (std::size_t k = 0; k < t; ++k) cell_mean[gi][k] /= static_cast<double>(group_n[gi]);
  }
  grand /= static_cast<double>(n * t);

  MixedAnovaResult r;
  for (std::size_t gi = 0; gi < g; ++gi)
    r.ss_group += static_cast<double>(group_n[gi] * t) * (group_mean[gi] - grand) *
                  (group_mean[gi] - grand);
  double ss_between_subjects = 0.0;
  for (std::size_t s = 0; s < n; ++s)
    ss_between_subjects +=
        static_cast<double>(t) * (subj_mean[s] - grand) * (subj_mean[s] - grand);
  r.ss_subjects_within = ss_between_subjects - r.ss_group;
  for (std::size_t k = 0; k < t; ++k)
    r.ss_time += static_cast<double>(n) * (time_mean[k] - grand) * (time_mean[k] - grand);
  for (std::size_t gi = 0; gi < g; ++gi)
    for (std::size_t k = 0; k < t; ++k) {
      double dev = cell_mean[gi][k] - group_mean[gi] - time_mean[k] + grand;
      r.ss_interaction += static_cast<double>(group_n[gi]) * dev * dev;
    }
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t k = 0; k < t; ++k) {
      double v = l.y[s][k];
      r.ss_total += (v - grand) * (v - grand);
      double resid = v - subj_mean[s] - cell_mean[l.ward_group[s]][k] +
                     group_mean[l.ward_group[s]];
      r.ss_error += resid * resid;
    }

  const int df_group = static_cast<int>(g) - 1;
  const int df_sw = static_cast<int>(n - g);
  const int df_time = static_cast<int>(t) - 1;
  const int df_inter = df_group * df_time;
  const int df_error = df_time * df_sw;

  auto make = [](const std::string& name, double ss_effect, int df1, double ss_err,
                 int df2) {
    AnovaResult a;
    a.effect = name;
    a.df1 = df1;
    a.df2 = df2;
    double ms_effect = ss_effect / df1;
    double ms_err = ss_err / df2;
    if (ms_err <= 0.0) {
      if (ss_effect <= 0.0) {
        a.f = 0.0;
        a.p = 1.0;
      } else {
        a.f = std::numeric_limits<double>::infinity();
        a.p = 0.0;
        a.degenerate = true;
      }
      return a;
    }
    a.f = ms_effect / ms_err;
    a.p = f_pvalue(a.f, df1, df2);
    return a;
  };
  r.group = make("group", r.ss_group, df_group, r.ss_subjects_within, df_sw);
  r.time = make("time", r.ss_time, df_time, r.ss_error, df_error);
  r.interaction = make("group_x_time", r.ss_interaction, df_inter, r.ss_error, df_error);
  return r;
}

struct PairedComparison {
  int year_a = 0;
  int year_b = 0;
  double t = 0.0;
  double p_uncorrected = 1.0;
  double p_corrected = 1.0;  // Bonferroni x number of pairs, capped at 1
  bool degenerate = false;   // zero-variance differences with nonzero mean
};

/// Paired t-test on within-ward differences for every year pair, Bonferroni
/// corrected by the number of pairs.
inline std::vector<PairedComparison> pairwise_time_comparisons(
    const std::vector<PanelObservation>& panel) {
  auto l = detail::layout_panel(panel);
  const std::size_t n = l.wards.size();
  const std::size_t t = l.years.size();
  if (n < 2) throw data_error("pairwise_time_comparisons: need at least 2 wards");
  const int npairs = static_cast<int>(t * (t - 1) / 2);
  std::vector<PairedComparison> out;
  for (std::size_t a = 0; a < t; ++a) {
    for (std::size_t b = a + 1; b < t; ++b) {
      PairedComparison pc;
      pc.year_a = l.years[a];
      pc.year_b = l.years[b];
      double mean = 0.0;
      for (std::size_t s = 0; s < n; ++s) mean += l.y[s][b] - l.y[s][a];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        double d = l.y[s][b] - l.y[s][a] - mean;
        ss += d * d;
      }
      double sd = std::sqrt(ss / static_cast<double>(n - 1));
      if (sd <= 0.0) {
        if (mean == 0.0) {
          pc.t = 0.0;
          pc.p_uncorrected = 1.0;
        } else {
          pc.t = mean > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
          pc.p_uncorrected = 0.0;
          pc.degenerate = true;
        }
      } else {
        pc.t = mean / (sd / std::sqrt(static_cast<double>(n)));
        pc.p_uncorrected = student_two_sided_p(pc.t, static_cast<double>(n - 1));
      }
      pc.p_corrected = std::min(1.0, pc.p_uncorrected * npairs);
      out.push_back(pc);
    }
  }
  return out;
}

}  // namespace wardflow::stats
