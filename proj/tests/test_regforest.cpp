#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ccf/forest.hpp"
#include "ccf/rng.hpp"

using namespace ccf;

TEST_CASE("default_mtry matches the min(sqrt(k)+20, k) rule") {
  CHECK(default_mtry(72) == 28);
  CHECK(default_mtry(4) == 4);
  CHECK(default_mtry(400) == 40);
  CHECK_THROWS_AS(default_mtry(0), std::invalid_argument);
}

namespace {

ForestParams small_params(int trees = 20, std::uint64_t seed = 5) {
  ForestParams p;
  p.num_trees = trees;
  p.seed = seed;
  p.n_threads = 2;
  return p;
}

struct Grid1D {
  Matrix X;
  std::vector<double> y;
  std::vector<int> clusters;

  explicit Grid1D(std::size_t n) : X(n, 1) {
    for (std::size_t i = 0; i < n; ++i) {
      X(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
      y.push_back(X(i, 0));
      clusters.push_back(static_cast<int>(i));
    }
  }
};

}  // namespace

TEST_CASE("constant target gives constant predictions") {
  Matrix X(40, 2);
  std::vector<double> y(40, 3.25);
  std::vector<int> cl(40);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < 40; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    cl[i] = static_cast<int>(i % 10);
  }
  auto f = fit_regression_forest(X, y, cl, small_params());
  for (std::size_t i = 0; i < 40; ++i)
    CHECK(f.predict(X.row(i)) == doctest::Approx(3.25));
}

TEST_CASE("single cluster degenerates to a bagged fit on identical rows") {
  Grid1D d(30);
  std::vector<int> one_cluster(30, 7);
  auto f = fit_regression_forest(d.X, d.y, one_cluster, small_params());
  for (const auto& t : f.trees())
    CHECK(t.subsample_clusters == std::vector<int>{7});
}

TEST_CASE("deep trees recover y = x1 within the grid spacing") {
  // oracle: exact nearest-cell lookup on the training grid
  Grid1D d(200);
  ForestParams p = small_params(30);
  p.min_leaf = 1;
  p.subsample_fraction = 1.0;
  auto f = fit_regression_forest(d.X, d.y, d.clusters, p);
  const double spacing = 1.0 / 199.0;
  for (std::size_t i = 0; i < 200; ++i) {
    double pred = f.predict(d.X.row(i));
    CHECK(std::fabs(pred - d.y[i]) <= spacing);
  }
}

TEST_CASE("constant covariates with varying target: root-only trees, not an error") {
  Matrix X(20, 1, 1.0);
  std::vector<double> y;
  std::vector<int> cl;
  for (std::size_t i = 0; i < 20; ++i) {
    y.push_back(static_cast<double>(i));
    cl.push_back(static_cast<int>(i));
  }
  ForestParams p = small_params();
  p.subsample_fraction = 1.0;
  auto f = fit_regression_forest(X, y, cl, p);
  for (const auto& t : f.trees()) CHECK(t.nodes.size() == 1);
  CHECK(f.predict(X.row(0)) == doctest::Approx(9.5));
}

TEST_CASE("every leaf holds at least min_leaf fitting rows") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix X(150, 3);
  std::vector<double> y(150);
  std::vector<int> cl(150);
  for (std::size_t i = 0; i < 150; ++i) {
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = g(rng);
    y[i] = X(i, 0) + g(rng);
    cl[i] = static_cast<int>(i % 50);
  }
  auto f = fit_regression_forest(X, y, cl, small_params(10));
  for (const auto& t : f.trees()) {
    std::vector<int> count(t.nodes.size(), 0);
    for (std::size_t i = 0; i < 150; ++i) {
      if (!std::binary_search(t.subsample_clusters.begin(), t.subsample_clusters.end(),
                              cl[i]))
        continue;
      int node = 0;
      while (!t.nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const auto& nd = t.nodes[static_cast<std::size_t>(node)];
        node = X(i, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left
                                                                          : nd.right;
      }
      ++count[static_cast<std::size_t>(node)];
    }
    for (std::size_t n = 0; n < t.nodes.size(); ++n)
      if (t.nodes[n].is_leaf()) CHECK(count[n] >= 5);
  }
}

TEST_CASE("determinism: same seed, same forest, any thread count") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  Matrix X(80, 2);
  std::vector<double> y(80);
  std::vector<int> cl(80);
  for (std::size_t i = 0; i < 80; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    y[i] = 2 * X(i, 0) + g(rng);
    cl[i] = static_cast<int>(i % 20);
  }
  ForestParams p1 = small_params(12, 77);
  p1.n_threads = 1;
  ForestParams p4 = p1;
  p4.n_threads = 4;
  auto f1 = fit_regression_forest(X, y, cl, p1);
  auto f4 = fit_regression_forest(X, y, cl, p4);
  REQUIRE(f1.trees().size() == f4.trees().size());
  for (std::size_t t = 0; t < f1.trees().size(); ++t) {
    CHECK(f1.trees()[t].subsample_clusters == f4.trees()[t].subsample_clusters);
    REQUIRE(f1.trees()[t].nodes.size() == f4.trees()[t].nodes.size());
  }
  for (std::size_t i = 0; i < 80; ++i)
    CHECK(f1.predict(X.row(i)) == f4.predict(X.row(i)));
}

TEST_CASE("serialization round trip preserves predictions bit-exactly") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  Matrix X(60, 2);
  std::vector<double> y(60);
  std::vector<int> cl(60);
  for (std::size_t i = 0; i < 60; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    y[i] = std::sin(3 * X(i, 0)) + 0.1 * g(rng);
    cl[i] = static_cast<int>(i % 30);
  }
  auto f = fit_regression_forest(X, y, cl, small_params(8));
  auto g2 = RegressionForest::from_json(f.to_json());
  for (std::size_t i = 0; i < 60; ++i)
    CHECK(f.predict(X.row(i)) == g2.predict(X.row(i)));
}

TEST_CASE("removing one tree moves the mean by at most the leaf range / num_trees") {
  Grid1D d(50);
  auto f = fit_regression_forest(d.X, d.y, d.clusters, small_params(10));
  const auto& trees = f.trees();
  for (std::size_t i = 0; i < 50; ++i) {
    std::vector<double> preds;
    for (const auto& t : trees) preds.push_back(t.predict(d.X.row(i)));
    auto [mn, mx] = std::minmax_element(preds.begin(), preds.end());
    double full = f.predict(d.X.row(i));
    double drop_first =
        (full * static_cast<double>(trees.size()) - preds[0]) /
        static_cast<double>(trees.size() - 1);
    CHECK(std::fabs(full - drop_first) <= (*mx - *mn) / static_cast<double>(trees.size()) +
                                              1e-12);
  }
}

TEST_CASE("crossfit: constant target predicts the constant out of fold") {
  Matrix X(40, 1);
  std::vector<double> y(40, 4.0);
  std::vector<int> cl(40);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < 40; ++i) {
    X(i, 0) = g(rng);
    cl[i] = static_cast<int>(i % 8);
  }
  auto pred = crossfit_predict(X, y, cl, small_params(10));
  for (double v : pred) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("crossfit: out-of-fold purity under cluster perturbation") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const std::size_t n = 60;
  Matrix X(n, 2);
  std::vector<double> y(n);
  std::vector<int> cl(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    y[i] = X(i, 0) + 0.3 * g(rng);
    cl[i] = static_cast<int>(i % 12);
  }
  auto base = crossfit_predict(X, y, cl, small_params(10, 21));

  // wreck the targets of cluster 3: its own out-of-fold predictions are
  // fit without it, so they cannot move
  auto y2 = y;
  for (std::size_t i = 0; i < n; ++i)
    if (cl[i] == 3) y2[i] += 1000.0;
  auto perturbed = crossfit_predict(X, y2, cl, small_params(10, 21));
  for (std::size_t i = 0; i < n; ++i)
    if (cl[i] == 3) CHECK(base[i] == perturbed[i]);
}

TEST_CASE("crossfit: fewer clusters than folds is an error") {
  Matrix X(20, 1);
  std::vector<double> y(20, 1.0);
  std::vector<int> cl(20, 0);
  CHECK_THROWS_AS(crossfit_predict(X, y, cl, small_params(), 2), std::invalid_argument);
}

TEST_CASE("crossfit recovers a step propensity within 0.05 MAE") {
  // p(x) = 0.3 + 0.4 * 1{x1 > 0}; derived oracle is the generator itself
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  const std::size_t n = 4000;
  Matrix X(n, 2);
  std::vector<double> d(n);
  std::vector<int> cl(n);
  std::vector<double> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    truth[i] = 0.3 + (X(i, 0) > 0 ? 0.4 : 0.0);
    d[i] = u(rng) < truth[i] ? 1.0 : 0.0;
    cl[i] = static_cast<int>(i / 4);
  }
  ForestParams p = small_params(80, 17);
  p.min_leaf = 100;
  auto pred = crossfit_predict(X, d, cl, p);
  double mae = 0;
  for (std::size_t i = 0; i < n; ++i) mae += std::fabs(pred[i] - truth[i]);
  mae /= static_cast<double>(n);
  CHECK(mae < 0.05);
}

TEST_CASE("propensity clamp bounds") {
  auto p = clamp_propensity({0.0, 0.5, 1.0});
  CHECK(p[0] == 0.01);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 0.99);
}
