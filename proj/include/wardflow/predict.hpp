#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wardflow/classify.hpp"
#include "wardflow/cohort.hpp"
#include "wardflow/features.hpp"
#include "wardflow/metrics.hpp"
#include "wardflow/random.hpp"
#include "wardflow/stats.hpp"
#include "wardflow/types.hpp"

namespace wardflow::ml {

struct DatasetAssembly {
  std::vector<LabeledSample> samples;
  std::map<std::string, std::size_t> exclusions;
};

/// Builds the per-ward prediction rows: initial 2010 rank, static geography,
/// expenditure features as means over the panel's fiscal years, growth
/// features as last-period over first-period ratios, and the binary label
/// from the 2010 -> 2015 rank change (an increase in rank is an
/// improvement). Wards with any missing feature or a zero rank change are
/// excluded and counted.
inline DatasetAssembly assemble_dataset(const WardMetricsPanel& panel, const ImdTable& imd,
                                        const WardTable& wards) {
  if (panel.years.empty()) throw data_error("assemble_dataset: empty panel");
  const std::size_t first = 0, last = panel.years.size() - 1;

  DatasetAssembly out;
  for (std::uint32_t w = 0; w < wards.size(); ++w) {
    const std::string& code = wards[w].ward_code;
    const DeprivationRecord* r2010 = imd.find(2010, code);
    const DeprivationRecord* r2015 = imd.find(2015, code);
    if (!r2010 || !r2015) {
      ++out.exclusions["missing IMD edition"];
      continue;
    }
    int delta = r2015->rank - r2010->rank;
    if (delta == 0) {
      ++out.exclusions["zero rank change"];
      continue;
    }

    LabeledSample s;
    s.ward_code = code;
    s.sub_region = panel.sub_region[w];
    s.label = delta > 0 ? 1 : 0;
    s.delta_rank = delta;
    s.values[0] = static_cast<double>(r2010->rank);  // InitialIMD
    s.values[2] = panel.area_km2[w];                 // Area
    s.values[3] = panel.distance_km[w];              // Distance

    auto endpoint_growth = [&](const std::string& name) {
      return growth_rate(panel.value(w, first, name), panel.value(w, last, name));
    };
    struct GrowthSpec {
      int slot;
      const char* base;
    };
    bool ok = true;
    for (const GrowthSpec& gs : {GrowthSpec{4, "VC"}, GrowthSpec{5, "N"}, GrowthSpec{6, "IC"},
                                 GrowthSpec{7, "OC"}, GrowthSpec{8, "IOR"},
                                 GrowthSpec{9, "ACC"}}) {
      auto g = endpoint_growth(gs.base);
      if (!g) {
        ++out.exclusions[std::string("missing growth feature ") + feature_names()[gs.slot]];
        ok = false;
        break;
      }
      s.values[gs.slot] = *g;
    }
    if (!ok) continue;

    struct MeanSpec {
      int slot;
      const char* name;
    };
    for (const MeanSpec& ms :
         {MeanSpec{10, "CEA"}, MeanSpec{11, "CEOP"}, MeanSpec{12, "CECH"},
          MeanSpec{13, "CELS"}, MeanSpec{14, "CERS"}, MeanSpec{15, "CET"}}) {
      double sum = 0.0;
      bool complete = true;
      for (std::size_t yi = 0; yi < panel.years.size(); ++yi) {
        auto v = panel.value(w, yi, ms.name);
        if (!v) {
          complete = false;
          break;
        }
        sum += *v;
      }
      if (!complete) {
        ++out.exclusions[std::string("missing expenditure feature ") + ms.name];
        ok = false;
        break;
      }
      s.values[ms.slot] = sum / static_cast<double>(panel.years.size());
    }
    if (!ok) continue;

    out.samples.push_back(std::move(s));
  }
  return out;
}

/// Wards whose absolute rank change exceeds the threshold.
inline std::vector<LabeledSample> subset_by_change(std::span<const LabeledSample> samples,
                                                   int threshold) {
  std::vector<LabeledSample> out;
  for (const auto& s : samples)
    if (std::abs(s.delta_rank) > threshold) out.push_back(s);
  return out;
}

/// Stratified fold assignment: per class, a seeded shuffle dealt round-robin,
/// so per-fold class counts stay within one of exact proportionality.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int k,
                                         std::uint64_t seed) {
  if (k < 2) throw config_error("stratified_folds: k must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, idx] : by_class)
    if (idx.size() < static_cast<std::size_t>(k))
      throw data_error("stratified_folds: class " + std::to_string(cls) + " has only " +
                       std::to_string(idx.size()) + " samples; reduce k");
  std::vector<int> fold(labels.size(), -1);
  for (auto& [cls, idx] : by_class) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls) + 0x5f0e1d2cULL));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % k);
  }
  return fold;
}

/// Rank AUC with midrank tie handling: the probability a positive scores
/// above a negative, ties counting half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw data_error("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t npos = 0;
  for (int l : labels) npos += static_cast<std::size_t>(l);
  std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0)
    throw data_error("roc_auc: needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  double u = rank_sum_pos - static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

struct CvMetrics {
  double auc = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  int folds = 0;
  int auc_folds = 0;        // folds with both classes in the test split
  int precision_folds = 0;  // folds with at least one positive prediction
  std::size_t n_samples = 0;
};

/// Stratified k-fold evaluation of one classifier. Accuracy/precision use a
/// 0.5 probability threshold with "improved" as the positive class; folds
/// whose test split has a single class contribute no AUC and are counted.
inline CvMetrics evaluate_cv(std::span<const LabeledSample> samples, ClassifierKind kind,
                             const FeatureSet& features, const Hyperparams& hp, int k,
                             std::uint64_t seed) {
  std::vector<int> labels(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
  std::vector<int> fold = stratified_folds(labels, k, seed);

  CvMetrics m;
  m.folds = k;
  m.n_samples = samples.size();
  double auc_sum = 0.0, acc_sum = 0.0, prec_sum = 0.0;
  for (int f = 0; f < k; ++f) {
    std::vector<LabeledSample> train;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (fold[i] == f) test_idx.push_back(i);
      else train.push_back(samples[i]);
    }
    TrainedModel model =
        train_classifier(kind, train, features, hp, derive_seed(seed, f + 1));
    std::vector<double> scores(test_idx.size());
    std::vector<int> truth(test_idx.size());
    for (std::size_t t = 0; t < test_idx.size(); ++t) {
      scores[t] = predict_proba(model, samples[test_idx[t]]);
      truth[t] = samples[test_idx[t]].label;
    }
    std::size_t pos_in_test = 0;
    for (int l : truth) pos_in_test += static_cast<std::size_t>(l);
    if (pos_in_test > 0 && pos_in_test < truth.size()) {
      auc_sum += roc_auc(scores, truth);
      ++m.auc_folds;
    }
    std::size_t correct = 0, tp = 0, predicted_pos = 0;
    for (std::size_t t = 0; t < test_idx.size(); ++t) {
      int pred = scores[t] >= 0.5 ? 1 : 0;
      if (pred == truth[t]) ++correct;
      if (pred == 1) {
        ++predicted_pos;
        if (truth[t] == 1) ++tp;
      }
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(test_idx.size());
    if (predicted_pos > 0) {
      prec_sum += static_cast<double>(tp) / static_cast<double>(predicted_pos);
      ++m.precision_folds;
    }
  }
  m.auc = m.auc_folds > 0 ? auc_sum / m.auc_folds : 0.0;
  m.accuracy = acc_sum / k;
  m.precision = m.precision_folds > 0 ? prec_sum / m.precision_folds : 0.0;
  return m;
}

/// Mean impurity decrease per feature across the forest's trees, normalized
/// to sum 1, with one-hot columns folded back into SubRegion.
inline std::vector<std::pair<std::string, double>> forest_importance(
    const TrainedModel& model) {
  if (model.kind != ClassifierKind::random_forest)
    throw data_error("forest_importance: model is not a random forest");
  std::vector<double> col_imp(model.recipe.dims(), 0.0);
  for (const auto& t : model.forest)
    for (std::size_t j = 0; j < col_imp.size(); ++j) col_imp[j] += t.importance[j];
  std::vector<double> by_feature(kFeatureCount, 0.0);
  for (std::size_t j = 0; j < col_imp.size(); ++j)
    by_feature[model.recipe.col_feature[j]] += col_imp[j];
  double total = std::accumulate(by_feature.begin(), by_feature.end(), 0.0);
  std::vector<std::pair<std::string, double>> out;
  for (int f = 0; f < kFeatureCount; ++f)
    if (model.recipe.features.on[f])
      out.emplace_back(feature_names()[f], total > 0.0 ? by_feature[f] / total : 0.0);
  return out;
}

struct AblationRow {
  std::string feature_set;  // full / no_geographic / no_network / no_expenditure
  ClassifierKind classifier;
  int feature_count = 0;
  CvMetrics metrics;
};

/// Four runs per classifier, dropping one feature class at a time. Fold
/// assignment depends only on (labels, k, seed), so folds are identical
/// across runs.
inline std::vector<AblationRow> ablation_by_class(std::span<const LabeledSample> samples,
                                                  std::span<const ClassifierKind> kinds,
                                                  const Hyperparams& hp, int k,
                                                  std::uint64_t seed) {
  struct SetSpec {
    const char* name;
    FeatureSet set;
  };
  const SetSpec sets[] = {
      {"full", FeatureSet::full()},
      {"no_geographic", FeatureSet::without(FeatureClass::geographic)},
      {"no_network", FeatureSet::without(FeatureClass::network)},
      {"no_expenditure", FeatureSet::without(FeatureClass::expenditure)},
  };
  std::vector<AblationRow> rows;
  for (const auto& spec : sets)
    for (auto kind : kinds) {
      AblationRow row;
      row.feature_set = spec.name;
      row.classifier = kind;
      row.feature_count = spec.set.active_count();
      row.metrics = evaluate_cv(samples, kind, spec.set, hp, k, seed);
      rows.push_back(std::move(row));
    }
  return rows;
}

}  // namespace wardflow::ml
