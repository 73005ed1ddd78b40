#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wardflow/types.hpp"

namespace wardflow::ml {

inline constexpr int kFeatureCount = 16;
inline constexpr int kSubRegionFeature = 1;  // the one categorical feature

inline const std::array<const char*, kFeatureCount>& feature_names() {
  static const std::array<const char*, kFeatureCount> names = {
      "InitialIMD", "SubRegion", "Area",  "Distance", "GRVC", "GRN",  "GRI",  "GRO",
      "GRIOR",      "GRACC",     "CEA",   "CEOP",     "CECH", "CELS", "CERS", "CET"};
  return names;
}

enum class FeatureClass { initial, geographic, network, expenditure };

inline FeatureClass feature_class(int feature) {
  if (feature == 0) return FeatureClass::initial;
  if (feature <= 4) return FeatureClass::geographic;
  if (feature <= 9) return FeatureClass::network;
  return FeatureClass::expenditure;
}

inline const char* to_string(FeatureClass c) {
  switch (c) {
    case FeatureClass::initial: return "initial";
    case FeatureClass::geographic: return "geographic";
    case FeatureClass::network: return "network";
    case FeatureClass::expenditure: return "expenditure";
  }
  return "?";
}

struct FeatureSet {
  std::array<bool, kFeatureCount> on{};

  static FeatureSet full() {
    FeatureSet s;
    s.on.fill(true);
    return s;
  }
  static FeatureSet without(FeatureClass c) {
    FeatureSet s = full();
    for (int f = 0; f < kFeatureCount; ++f)
      if (feature_class(f) == c) s.on[f] = false;
    return s;
  }
  int active_count() const {
    int n = 0;
    for (bool b : on) n += b;
    return n;
  }
};

/// One ward's prediction row. label 1 = improved (rank_2015 > rank_2010),
/// 0 = worsened. The SubRegion slot in `values` is unused; the category
/// lives in `sub_region`.
struct LabeledSample {
  std::string ward_code;
  std::array<double, kFeatureCount> values{};
  std::string sub_region;
  int label = 0;
  int delta_rank = 0;
};

struct Matrix {
  std::size_t n = 0, d = 0;
  std::vector<double> x;  // row-major

  double& at(std::size_t i, std::size_t j) { return x[i * d + j]; }
  double at(std::size_t i, std::size_t j) const { return x[i * d + j]; }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * d, d}; }
};

/// Feature -> column mapping fitted on training data: active numeric
/// features in index order, then one-hot columns for SubRegion (categories
/// sorted, as seen in training). Standardization stats are per column;
/// one-hot columns are left unscaled.
struct EncodingRecipe {
  FeatureSet features;
  std::vector<std::string> categories;
  std::vector<int> col_feature;  // column -> feature index
  bool standardized = false;
  std::vector<double> mean, scale;  // scale 0 marks a constant column

  std::size_t dims() const { return col_feature.size(); }
};

inline EncodingRecipe make_recipe(std::span<const LabeledSample> train,
                                  const FeatureSet& features, bool standardize) {
  EncodingRecipe r;
  r.features = features;
  for (int f = 0; f < kFeatureCount; ++f)
    if (features.on[f] && f != kSubRegionFeature) r.col_feature.push_back(f);
  if (features.on[kSubRegionFeature]) {
    std::vector<std::string> cats;
    for (const auto& s : train) cats.push_back(s.sub_region);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    r.categories = std::move(cats);
    for (std::size_t c = 0; c < r.categories.size(); ++c)
      r.col_feature.push_back(kSubRegionFeature);
  }
  r.standardized = standardize;
  return r;
}

inline void encode_into(const EncodingRecipe& r, const LabeledSample& s, double* out) {
  std::size_t col = 0;
  for (; col < r.col_feature.size() && r.col_feature[col] != kSubRegionFeature; ++col)
    out[col] = s.values[r.col_feature[col]];
  for (std::size_t c = 0; col < r.col_feature.size(); ++col, ++c)
    out[col] = (s.sub_region == r.categories[c]) ? 1.0 : 0.0;
  if (r.standardized)
    for (std::size_t j = 0; j < r.dims(); ++j)
      out[j] = r.scale[j] > 0.0 ? (out[j] - r.mean[j]) / r.scale[j] : 0.0;
}

inline Matrix encode_all(const EncodingRecipe& r, std::span<const LabeledSample> samples) {
  Matrix m;
  m.n = samples.size();
  m.d = r.dims();
  m.x.resize(m.n * m.d);
  for (std::size_t i = 0; i < m.n; ++i) encode_into(r, samples[i], m.x.data() + i * m.d);
  return m;
}

/// Fits population mean/sd per column; one-hot columns are skipped.
inline void fit_standardization(EncodingRecipe& r, std::span<const LabeledSample> train) {
  r.standardized = false;  // encode raw while fitting
  Matrix m = encode_all(r, train);
  r.mean.assign(m.d, 0.0);
  r.scale.assign(m.d, 0.0);
  std::size_t numeric_cols = 0;
  while (numeric_cols < r.col_feature.size() &&
         r.col_feature[numeric_cols] != kSubRegionFeature)
    ++numeric_cols;
  for (std::size_t j = 0; j < numeric_cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) mean += m.at(i, j);
    mean /= static_cast<double>(m.n);
    double var = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
      double d = m.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m.n);
    r.mean[j] = mean;
    r.scale[j] = std::sqrt(var);
  }
  for (std::size_t j = numeric_cols; j < m.d; ++j) {
    r.mean[j] = 0.0;
    r.scale[j] = 1.0;
  }
  r.standardized = true;
}

}  // namespace wardflow::ml
