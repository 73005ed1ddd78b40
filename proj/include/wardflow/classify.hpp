#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wardflow/features.hpp"
#include "wardflow/random.hpp"
#include "wardflow/types.hpp"

namespace wardflow::ml {

enum class ClassifierKind { naive_bayes, logistic_regression, decision_tree, random_forest };

inline const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::naive_bayes: return "naive_bayes";
    case ClassifierKind::logistic_regression: return "logistic_regression";
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::random_forest: return "random_forest";
  }
  return "?";
}

inline std::optional<ClassifierKind> parse_classifier_kind(const std::string& s) {
  for (auto k : {ClassifierKind::naive_bayes, ClassifierKind::logistic_regression,
                 ClassifierKind::decision_tree, ClassifierKind::random_forest})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct Hyperparams {
  double nb_var_floor_ratio = 1e-9;  // floor = ratio * max training-column variance
  double logreg_lambda = 1.0;
  double logreg_tol = 1e-6;
  int logreg_max_iter = 10000;
  int tree_max_depth = 8;
  int tree_min_leaf = 5;
  int forest_trees = 100;
};

struct NbParams {
  double log_prior_pos = 0.0, log_prior_neg = 0.0;
  std::vector<double> mean_pos, var_pos, mean_neg, var_neg;
};

struct LrParams {
  std::vector<double> w;
  double b = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
};

struct TreeNode {
  int feature = -1;  // encoded column; -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double p_pos = 0.0;
  std::size_t n = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<double> importance;  // per encoded column, sums to 1 when any split exists
};

struct TrainedModel {
  ClassifierKind kind;
  EncodingRecipe recipe;
  NbParams nb;
  LrParams lr;
  Tree tree;
  std::vector<Tree> forest;
};

namespace detail {

inline double gini_from_counts(std::size_t pos, std::size_t n) {
  if (n == 0) return 0.0;
  double p = static_cast<double>(pos) / static_cast<double>(n);
  double q = 1.0 - p;
  return 1.0 - p * p - q * q;
}

struct SplitChoice {
  bool found = false;
  int column = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Best gini split over `columns` (ascending). Candidate thresholds are
/// midpoints of consecutive distinct values; both children must satisfy the
/// leaf minimum. Ties keep the first candidate encountered, which is the
/// lowest column then lowest threshold.
inline SplitChoice best_split(const Matrix& x, const std::vector<int>& y,
                              const std::vector<std::uint32_t>& idx,
                              const std::vector<int>& columns, int min_leaf) {
  const std::size_t n = idx.size();
  std::size_t pos_total = 0;
  for (auto i : idx) pos_total += static_cast<std::size_t>(y[i]);
  double parent_gini = gini_from_counts(pos_total, n);

  SplitChoice best;
  std::vector<std::pair<double, int>> vals(n);
  for (int col : columns) {
    for (std::size_t k = 0; k < n; ++k)
      vals[k] = {x.at(idx[k], static_cast<std::size_t>(col)), y[idx[k]]};
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t left_n = 0, left_pos = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      ++left_n;
      left_pos += static_cast<std::size_t>(vals[k].second);
      if (vals[k].first == vals[k + 1].first) continue;
      std::size_t right_n = n - left_n;
      if (left_n < static_cast<std::size_t>(min_leaf) ||
          right_n < static_cast<std::size_t>(min_leaf))
        continue;
      std::size_t right_pos = pos_total - left_pos;
      double weighted =
          (static_cast<double>(left_n) / static_cast<double>(n)) *
              gini_from_counts(left_pos, left_n) +
          (static_cast<double>(right_n) / static_cast<double>(n)) *
              gini_from_counts(right_pos, right_n);
      double gain = parent_gini - weighted;
      if (gain > best.gain) {
        best.found = true;
        best.column = col;
        best.threshold = (vals[k].first + vals[k + 1].first) / 2.0;
        best.gain = gain;
      }
    }
  }
  return best;
}

/// CART with gini impurity. `rng` is null for the plain tree; the forest
/// passes one to draw sqrt(d) candidate columns per node.
inline Tree build_tree(const Matrix& x, const std::vector<int>& y,
                       const std::vector<std::uint32_t>& root_idx, const Hyperparams& hp,
                       Rng* rng) {
  Tree tree;
  tree.importance.assign(x.d, 0.0);
  const double n_root = static_cast<double>(root_idx.size());

  std::vector<int> all_columns(x.d);
  std::iota(all_columns.begin(), all_columns.end(), 0);
  int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.d))));

  struct Work {
    std::vector<std::uint32_t> idx;
    int depth;
    int slot;
  };
  std::vector<Work> stack;
  tree.nodes.emplace_back();
  stack.push_back({root_idx, 0, 0});

  std::vector<int> scratch(all_columns);
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    std::size_t pos = 0;
    for (auto i : w.idx) pos += static_cast<std::size_t>(y[i]);
    TreeNode& node = tree.nodes[w.slot];
    node.n = w.idx.size();
    node.p_pos = static_cast<double>(pos) / static_cast<double>(w.idx.size());
    bool pure = pos == 0 || pos == w.idx.size();
    if (pure || w.depth >= hp.tree_max_depth ||
        w.idx.size() < 2 * static_cast<std::size_t>(hp.tree_min_leaf))
      continue;

    SplitChoice split;
    if (rng == nullptr) {
      split = best_split(x, y, w.idx, all_columns, hp.tree_min_leaf);
    } else {
      // Partial Fisher-Yates, then ascending so the tie rule stays intact.
      for (int k = 0; k < mtry; ++k) {
        std::size_t j = k + static_cast<std::size_t>(
                                rng->uniform_index(scratch.size() - static_cast<std::size_t>(k)));
        std::swap(scratch[k], scratch[j]);
      }
      std::vector<int> cols(scratch.begin(), scratch.begin() + mtry);
      std::sort(cols.begin(), cols.end());
      split = best_split(x, y, w.idx, cols, hp.tree_min_leaf);
    }
    if (!split.found || split.gain <= 0.0) continue;

    std::vector<std::uint32_t> left, right;
    for (auto i : w.idx) {
      if (x.at(i, static_cast<std::size_t>(split.column)) <= split.threshold)
        left.push_back(i);
      else
        right.push_back(i);
    }
    tree.importance[static_cast<std::size_t>(split.column)] +=
        (static_cast<double>(w.idx.size()) / n_root) * split.gain;

    int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    int ri = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode& parent = tree.nodes[w.slot];
    parent.feature = split.column;
    parent.threshold = split.threshold;
    parent.left = li;
    parent.right = ri;
    int depth = w.depth;
    stack.push_back({std::move(right), depth + 1, ri});
    stack.push_back({std::move(left), depth + 1, li});
  }

  double total = std::accumulate(tree.importance.begin(), tree.importance.end(), 0.0);
  if (total > 0.0)
    for (double& v : tree.importance) v /= total;
  return tree;
}

inline double tree_proba(const Tree& t, std::span<const double> row) {
  int cur = 0;
  while (t.nodes[cur].feature >= 0) {
    const TreeNode& n = t.nodes[cur];
    cur = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return t.nodes[cur].p_pos;
}

inline double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Fits one of the four learners. Preprocessing (standardization stats,
/// one-hot map) is fitted on the training split only and travels with the
/// model. Training data must contain both classes.
inline TrainedModel train_classifier(ClassifierKind kind,
                                     std::span<const LabeledSample> train,
                                     const FeatureSet& features, const Hyperparams& hp,
                                     std::uint64_t seed) {
  std::size_t pos = 0;
  for (const auto& s : train) pos += static_cast<std::size_t>(s.label);
  if (train.empty() || pos == 0 || pos == train.size())
    throw data_error("train_classifier: training data must contain both classes");

  TrainedModel model;
  model.kind = kind;
  bool standardize = kind == ClassifierKind::logistic_regression;
  model.recipe = make_recipe(train, features, false);
  if (standardize) fit_standardization(model.recipe, train);
  Matrix x = encode_all(model.recipe, train);
  std::vector<int> y(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) y[i] = train[i].label;

  switch (kind) {
    case ClassifierKind::naive_bayes: {
      const std::size_t d = x.d, n = x.n, npos = pos, nneg = n - pos;
      NbParams& nb = model.nb;
      nb.log_prior_pos = std::log(static_cast<double>(npos) / static_cast<double>(n));
      nb.log_prior_neg = std::log(static_cast<double>(nneg) / static_cast<double>(n));
      nb.mean_pos.assign(d, 0.0);
      nb.var_pos.assign(d, 0.0);
      nb.mean_neg.assign(d, 0.0);
      nb.var_neg.assign(d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          (y[i] ? nb.mean_pos : nb.mean_neg)[j] += x.at(i, j);
      for (std::size_t j = 0; j < d; ++j) {
        nb.mean_pos[j] /= static_cast<double>(npos);
        nb.mean_neg[j] /= static_cast<double>(nneg);
      }
      double max_var = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double dv = x.at(i, j) - mean;
          var += dv * dv;
        }
        max_var = std::max(max_var, var / static_cast<double>(n));
      }
      const double floor = std::max(hp.nb_var_floor_ratio * max_var, 1e-300);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          double dv = x.at(i, j) - (y[i] ? nb.mean_pos : nb.mean_neg)[j];
          (y[i] ? nb.var_pos : nb.var_neg)[j] += dv * dv;
        }
      for (std::size_t j = 0; j < d; ++j) {
        nb.var_pos[j] = std::max(nb.var_pos[j] / static_cast<double>(npos), floor);
        nb.var_neg[j] = std::max(nb.var_neg[j] / static_cast<double>(nneg), floor);
      }
      break;
    }
    case ClassifierKind::logistic_regression: {
      const std::size_t d = x.d, n = x.n;
      LrParams& lr = model.lr;
      lr.w.assign(d, 0.0);
      lr.b = 0.0;
      std::vector<double> z(n), grad_w(d);
      const double lambda = hp.logreg_lambda;
      auto objective = [&](const std::vector<double>& w, double b) {
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double zi = b;
          auto row = x.row(i);
          for (std::size_t j = 0; j < d; ++j) zi += w[j] * row[j];
          obj += y[i] ? detail::softplus(-zi) : detail::softplus(zi);
        }
        obj /= static_cast<double>(n);
        double reg = 0.0;
        for (double wj : w) reg += wj * wj;
        return obj + lambda * reg / (2.0 * static_cast<double>(n));
      };
      double step = 1.0;
      double obj = objective(lr.w, lr.b);
      for (int it = 0; it < hp.logreg_max_iter; ++it) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double zi = lr.b;
          auto row = x.row(i);
          for (std::size_t j = 0; j < d; ++j) zi += lr.w[j] * row[j];
          double err = detail::sigmoid(zi) - static_cast<double>(y[i]);
          for (std::size_t j = 0; j < d; ++j) grad_w[j] += err * row[j];
          grad_b += err;
        }
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          grad_w[j] = grad_w[j] / static_cast<double>(n) +
                      lambda * lr.w[j] / static_cast<double>(n);
          norm2 += grad_w[j] * grad_w[j];
        }
        grad_b /= static_cast<double>(n);
        norm2 += grad_b * grad_b;
        lr.grad_norm = std::sqrt(norm2);
        lr.iterations = it;
        if (lr.grad_norm < hp.logreg_tol) break;
        // Armijo backtracking keeps the plain gradient step stable.
        std::vector<double> w_new(d);
        double b_new, obj_new;
        step *= 2.0;
        for (int halvings = 0; halvings < 60; ++halvings) {
          for (std::size_t j = 0; j < d; ++j) w_new[j] = lr.w[j] - step * grad_w[j];
          b_new = lr.b - step * grad_b;
          obj_new = objective(w_new, b_new);
          if (obj_new <= obj - 1e-4 * step * norm2) break;
          step *= 0.5;
        }
        lr.w = std::move(w_new);
        lr.b = b_new;
        obj = obj_new;
      }
      break;
    }
    case ClassifierKind::decision_tree: {
      std::vector<std::uint32_t> idx(x.n);
      std::iota(idx.begin(), idx.end(), 0u);
      model.tree = detail::build_tree(x, y, idx, hp, nullptr);
      break;
    }
    case ClassifierKind::random_forest: {
      model.forest.reserve(static_cast<std::size_t>(hp.forest_trees));
      for (int t = 0; t < hp.forest_trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t) + 1));
        std::vector<std::uint32_t> boot(x.n);
        for (std::size_t i = 0; i < x.n; ++i)
          boot[i] = static_cast<std::uint32_t>(rng.uniform_index(x.n));
        std::sort(boot.begin(), boot.end());
        model.forest.push_back(detail::build_tree(x, y, boot, hp, &rng));
      }
      break;
    }
  }
  return model;
}

/// Probability of the positive ("improved") class.
inline double predict_proba(const TrainedModel& model, const LabeledSample& sample) {
  std::vector<double> row(model.recipe.dims());
  encode_into(model.recipe, sample, row.data());
  switch (model.kind) {
    case ClassifierKind::naive_bayes: {
      const NbParams& nb = model.nb;
      double lp = nb.log_prior_pos, ln = nb.log_prior_neg;
      for (std::size_t j = 0; j < row.size(); ++j) {
        double dp = row[j] - nb.mean_pos[j];
        double dn = row[j] - nb.mean_neg[j];
        lp += -0.5 * std::log(2.0 * M_PI * nb.var_pos[j]) - dp * dp / (2.0 * nb.var_pos[j]);
        ln += -0.5 * std::log(2.0 * M_PI * nb.var_neg[j]) - dn * dn / (2.0 * nb.var_neg[j]);
      }
      return detail::sigmoid(lp - ln);
    }
    case ClassifierKind::logistic_regression: {
      double z = model.lr.b;
      for (std::size_t j = 0; j < row.size(); ++j) z += model.lr.w[j] * row[j];
      return detail::sigmoid(z);
    }
    case ClassifierKind::decision_tree:
      return detail::tree_proba(model.tree, row);
    case ClassifierKind::random_forest: {
      double sum = 0.0;
      for (const auto& t : model.forest) sum += detail::tree_proba(t, row);
      return sum / static_cast<double>(model.forest.size());
    }
  }
  throw data_error("predict_proba: unknown classifier kind");
}

/// Raw-schema entry point; `values` must carry exactly the 16 feature slots
/// the model was trained against.
inline double predict_proba(const TrainedModel& model, std::span<const double> values,
                            const std::string& sub_region) {
  if (values.size() != static_cast<std::size_t>(kFeatureCount))
    throw data_error("predict_proba: sample schema does not match training schema");
  LabeledSample s;
  std::copy(values.begin(), values.end(), s.values.begin());
  s.sub_region = sub_region;
  return predict_proba(model, s);
}

}  // namespace wardflow::ml
