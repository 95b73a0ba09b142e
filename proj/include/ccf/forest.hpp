#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccf/matrix.hpp"

namespace ccf {

struct ForestParams {
  int num_trees = 2000;
  double subsample_fraction = 0.5;
  int mtry = 0;  // 0 selects default_mtry(k)
  int min_leaf = 5;
  bool honesty = false;
  double min_child_share = 0.05;  // causal trees only
  std::uint64_t seed = 42;
  int n_threads = 0;  // 0 = hardware concurrency
};

/// min(floor(sqrt(k) + 20), k); k = 72 gives 28.
int default_mtry(int k);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prediction = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;          // nodes[0] is the root
  std::vector<int> subsample_clusters;  // cluster ids used to fit

  double predict(std::span<const double> x) const;
};

class RegressionForest {
 public:
  RegressionForest() = default;
  RegressionForest(ForestParams params, std::size_t n_features,
                   std::vector<RegressionTree> trees)
      : params_(params), n_features_(n_features), trees_(std::move(trees)) {}

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;

  const ForestParams& params() const { return params_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }

  std::string to_json() const;
  static RegressionForest from_json(const std::string& text);

 private:
  ForestParams params_;
  std::size_t n_features_ = 0;
  std::vector<RegressionTree> trees_;
};

/// CART forest on cluster-level subsamples with SSE splitting.
/// Deterministic given params.seed, independent of thread count.
RegressionForest fit_regression_forest(const Matrix& X, std::span<const double> y,
                                       std::span<const int> clusters,
                                       const ForestParams& params);

/// Out-of-fold predictions with cluster-level fold assignment: each row is
/// predicted only by forests whose training folds exclude its cluster.
std::vector<double> crossfit_predict(const Matrix& X, std::span<const double> y,
                                     std::span<const int> clusters,
                                     const ForestParams& params, int folds = 2);

/// Clamp a probability vector into [lo, hi] (overlap guard for propensities).
std::vector<double> clamp_propensity(std::vector<double> p, double lo = 0.01,
                                     double hi = 0.99);

}  // namespace ccf
