#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "wardflow/classify.hpp"

using namespace wardflow::ml;

namespace {

// Numeric feature slots in schema order, skipping the categorical one.
constexpr int kSlots[] = {0, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};

FeatureSet numeric_features(int k) {
  FeatureSet s;
  s.on.fill(false);
  for (int i = 0; i < k; ++i) s.on[kSlots[i]] = true;
  return s;
}

std::vector<LabeledSample> samples_from(const std::vector<std::vector<double>>& rows,
                                        const std::vector<int>& labels,
                                        const std::vector<std::string>& regions = {}) {
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    LabeledSample s;
    s.ward_code = "W" + std::to_string(i);
    for (std::size_t j = 0; j < rows[i].size(); ++j) s.values[kSlots[j]] = rows[i][j];
    s.sub_region = regions.empty() ? "X" : regions[i];
    s.label = labels[i];
    s.delta_rank = labels[i] ? 1 : -1;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian NB: symmetric classes meet at 0.5") {
  // sample means 0 and 2, equal variances, equal priors
  auto samples = samples_from({{-1}, {0}, {1}, {1}, {2}, {3}}, {0, 0, 0, 1, 1, 1});
  auto model = train_classifier(ClassifierKind::naive_bayes, samples, numeric_features(1),
                                Hyperparams{}, 1);
  LabeledSample probe;
  probe.values[0] = 1.0;
  probe.sub_region = "X";
  CHECK(predict_proba(model, probe) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("gaussian NB posterior matches direct Bayes rule on 1-D data") {
  std::mt19937_64 eng(53);
  std::normal_distribution<double> n0(0.0, 1.0), n1(1.5, 0.7);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({n0(eng)});
    labels.push_back(0);
  }
  for (int i = 0; i < 25; ++i) {
    rows.push_back({n1(eng)});
    labels.push_back(1);
  }
  auto samples = samples_from(rows, labels);
  auto model = train_classifier(ClassifierKind::naive_bayes, samples, numeric_features(1),
                                Hyperparams{}, 1);
  // fitted class-conditional moments, population variances
  double m0 = 0, m1 = 0, v0 = 0, v1 = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) (labels[i] ? m1 : m0) += rows[i][0];
  m0 /= 40;
  m1 /= 25;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double d = rows[i][0] - (labels[i] ? m1 : m0);
    (labels[i] ? v1 : v0) += d * d;
  }
  v0 /= 40;
  v1 /= 25;
  for (double x : {-1.0, 0.3, 1.0, 2.4}) {
    LabeledSample probe;
    probe.values[0] = x;
    probe.sub_region = "X";
    CHECK(predict_proba(model, probe) ==
          Catch::Approx(oracle::nb_posterior_1d(x, 25.0 / 65.0, m1, v1, m0, v0)).margin(1e-9));
  }
}

TEST_CASE("gaussian NB: identical likelihoods return the prior") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int rep = 0; rep < 1; ++rep)
    for (double x : {0.0, 1.0, 2.0}) {
      rows.push_back({x});
      labels.push_back(0);
    }
  for (int rep = 0; rep < 3; ++rep)
    for (double x : {0.0, 1.0, 2.0}) {
      rows.push_back({x});
      labels.push_back(1);
    }
  auto model = train_classifier(ClassifierKind::naive_bayes, samples_from(rows, labels),
                                numeric_features(1), Hyperparams{}, 1);
  LabeledSample probe;
  probe.values[0] = 0.7;
  probe.sub_region = "X";
  CHECK(predict_proba(model, probe) == Catch::Approx(0.75).margin(1e-9));
}

TEST_CASE("decision tree fits separable data exactly") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::mt19937_64 eng(59);
  std::uniform_real_distribution<double> lo(0, 1), hi(3, 4);
  for (int i = 0; i < 20; ++i) {
    rows.push_back({lo(eng), lo(eng)});
    labels.push_back(0);
    rows.push_back({hi(eng), hi(eng)});
    labels.push_back(1);
  }
  auto samples = samples_from(rows, labels);
  auto model = train_classifier(ClassifierKind::decision_tree, samples, numeric_features(2),
                                Hyperparams{}, 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int pred = predict_proba(model, samples[i]) >= 0.5 ? 1 : 0;
    CHECK(pred == labels[i]);
  }
}

TEST_CASE("tree root split equals the exhaustive-split oracle") {
  std::mt19937_64 eng(61);
  std::uniform_real_distribution<double> u(0, 10);
  std::bernoulli_distribution coin(0.5);
  Hyperparams hp;
  hp.tree_max_depth = 1;
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t n = 12 + static_cast<std::size_t>(trial) % 38;
    std::vector<std::vector<double>> rows(n, std::vector<double>(4));
    std::vector<int> labels(n);
    bool both = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : rows[i]) v = u(eng);
      labels[i] = coin(eng) ? 1 : 0;
    }
    labels[0] = 0;
    labels[1] = 1;  // both classes present
    (void)both;
    auto model = train_classifier(ClassifierKind::decision_tree, samples_from(rows, labels),
                                  numeric_features(4), hp, 1);
    auto best = oracle::exhaustive_best_split(rows, labels, hp.tree_min_leaf);
    const auto& root = model.tree.nodes[0];
    if (!best.found) {
      CHECK(root.feature == -1);
    } else {
      REQUIRE(root.feature >= 0);
      CHECK(root.feature == best.column);
      CHECK(root.threshold == best.threshold);
    }
  }
}

TEST_CASE("standardizing inputs does not move tree predictions") {
  std::mt19937_64 eng(67);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<std::vector<double>> rows(40, std::vector<double>(3));
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto& v : rows[i]) v = u(eng);
    labels[i] = rows[i][0] + 0.3 * rows[i][1] > 0 ? 1 : 0;
  }
  // standardize by hand
  std::vector<double> mean(3, 0), sd(3, 0);
  for (auto& r : rows)
    for (int j = 0; j < 3; ++j) mean[j] += r[j] / rows.size();
  for (auto& r : rows)
    for (int j = 0; j < 3; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / rows.size();
  for (int j = 0; j < 3; ++j) sd[j] = std::sqrt(sd[j]);
  std::vector<std::vector<double>> scaled(rows);
  for (auto& r : scaled)
    for (int j = 0; j < 3; ++j) r[j] = (r[j] - mean[j]) / sd[j];

  auto m_raw = train_classifier(ClassifierKind::decision_tree, samples_from(rows, labels),
                                numeric_features(3), Hyperparams{}, 1);
  auto m_scaled = train_classifier(ClassifierKind::decision_tree,
                                   samples_from(scaled, labels), numeric_features(3),
                                   Hyperparams{}, 1);
  auto raw_samples = samples_from(rows, labels);
  auto scaled_samples = samples_from(scaled, labels);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(predict_proba(m_raw, raw_samples[i]) ==
          Catch::Approx(predict_proba(m_scaled, scaled_samples[i])).margin(1e-12));
}

TEST_CASE("logistic regression with constant features learns the class prior") {
  SECTION("balanced") {
    std::vector<std::vector<double>> rows(40, std::vector<double>{3.5});
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) labels[i] = i < 20;
    auto model = train_classifier(ClassifierKind::logistic_regression,
                                  samples_from(rows, labels), numeric_features(1),
                                  Hyperparams{}, 1);
    LabeledSample probe;
    probe.values[0] = 3.5;
    probe.sub_region = "X";
    CHECK(predict_proba(model, probe) == Catch::Approx(0.5).margin(1e-3));
  }
  SECTION("unbalanced 70/30") {
    std::vector<std::vector<double>> rows(40, std::vector<double>{3.5});
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) labels[i] = i < 28;
    auto model = train_classifier(ClassifierKind::logistic_regression,
                                  samples_from(rows, labels), numeric_features(1),
                                  Hyperparams{}, 1);
    LabeledSample probe;
    probe.values[0] = 3.5;
    probe.sub_region = "X";
    CHECK(predict_proba(model, probe) == Catch::Approx(0.7).margin(1e-3));
  }
}

TEST_CASE("logistic regression separates a clean margin") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 15; ++i) {
    rows.push_back({-2.0 - i * 0.1});
    labels.push_back(0);
    rows.push_back({2.0 + i * 0.1});
    labels.push_back(1);
  }
  auto samples = samples_from(rows, labels);
  auto model = train_classifier(ClassifierKind::logistic_regression, samples,
                                numeric_features(1), Hyperparams{}, 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double p = predict_proba(model, samples[i]);
    CHECK((labels[i] ? p > 0.5 : p < 0.5));
  }
}

TEST_CASE("forest of identical stumps equals the single tree") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({0.0});
    labels.push_back(0);
    rows.push_back({1.0});
    labels.push_back(1);
  }
  auto samples = samples_from(rows, labels);
  Hyperparams hp;
  hp.forest_trees = 15;
  auto forest = train_classifier(ClassifierKind::random_forest, samples, numeric_features(1),
                                 hp, 7);
  auto tree = train_classifier(ClassifierKind::decision_tree, samples, numeric_features(1),
                               hp, 7);
  LabeledSample probe;
  probe.sub_region = "X";
  for (double x : {-1.0, 0.2, 0.7, 2.0}) {
    probe.values[0] = x;
    CHECK(predict_proba(forest, probe) == Catch::Approx(predict_proba(tree, probe)).margin(1e-12));
  }
}

TEST_CASE("same seed gives bit-identical forests") {
  std::mt19937_64 eng(71);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> rows(60, std::vector<double>(3));
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto& v : rows[i]) v = u(eng);
    labels[i] = u(eng) < 0.5;
  }
  labels[0] = 0;
  labels[1] = 1;
  auto samples = samples_from(rows, labels);
  auto a = train_classifier(ClassifierKind::random_forest, samples, numeric_features(3),
                            Hyperparams{}, 99);
  auto b = train_classifier(ClassifierKind::random_forest, samples, numeric_features(3),
                            Hyperparams{}, 99);
  auto c = train_classifier(ClassifierKind::random_forest, samples, numeric_features(3),
                            Hyperparams{}, 100);
  bool any_diff_seed_change = false;
  for (const auto& s : samples) {
    double pa = predict_proba(a, s), pb = predict_proba(b, s), pc = predict_proba(c, s);
    CHECK(pa == pb);  // bit-identical
    if (pa != pc) any_diff_seed_change = true;
  }
  CHECK(any_diff_seed_change);
}

TEST_CASE("one-hot SubRegion reaches every learner") {
  std::vector<std::vector<double>> rows(24, std::vector<double>{0.0});
  std::vector<int> labels(24);
  std::vector<std::string> regions(24);
  for (int i = 0; i < 24; ++i) {
    bool east = i % 2 == 0;
    regions[i] = east ? "East" : "West";
    labels[i] = east ? 1 : 0;
  }
  auto samples = samples_from(rows, labels, regions);
  FeatureSet fs;
  fs.on.fill(false);
  fs.on[kSubRegionFeature] = true;
  fs.on[0] = true;
  for (auto kind : {ClassifierKind::naive_bayes, ClassifierKind::logistic_regression,
                    ClassifierKind::decision_tree}) {
    auto model = train_classifier(kind, samples, fs, Hyperparams{}, 5);
    CHECK(predict_proba(model, samples[0]) > 0.5);
    CHECK(predict_proba(model, samples[1]) < 0.5);
  }
}

TEST_CASE("training errors") {
  std::vector<std::vector<double>> rows(10, std::vector<double>{1.0});
  std::vector<int> labels(10, 1);
  CHECK_THROWS_AS(train_classifier(ClassifierKind::naive_bayes, samples_from(rows, labels),
                                   numeric_features(1), Hyperparams{}, 1),
                  wardflow::data_error);
}

TEST_CASE("raw predict rejects schema mismatches") {
  auto samples = samples_from({{0.0}, {1.0}, {0.1}, {0.9}, {0.2}, {0.8}, {0.0}, {1.0},
                               {0.1}, {0.9}},
                              {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  auto model = train_classifier(ClassifierKind::naive_bayes, samples, numeric_features(1),
                                Hyperparams{}, 1);
  std::vector<double> wrong(7, 0.0);
  CHECK_THROWS_AS(predict_proba(model, std::span<const double>(wrong), "X"),
                  wardflow::data_error);
  std::vector<double> right(kFeatureCount, 0.0);
  CHECK_NOTHROW(predict_proba(model, std::span<const double>(right), "X"));
}
