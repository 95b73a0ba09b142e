#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ccf/forest.hpp"
#include "ccf/matrix.hpp"

namespace ccf {

/// Cross-fitted nuisance predictions, one entry per observation.
struct NuisanceEstimates {
  std::vector<double> p_hat;    // propensity, clamped into (0, 1)
  std::vector<double> mu_hat;   // E[Y | X]
  std::vector<double> mu1_hat;  // E[Y | X, D = 1]
  std::vector<double> mu0_hat;  // E[Y | X, D = 0]

  std::size_t size() const { return p_hat.size(); }
  void validate(std::size_t n) const;
  std::uint64_t content_hash() const;
};

/// No-intercept least squares of outcome residuals on treatment residuals.
/// Throws when the node has no treatment variation.
double robinson_theta(std::span<const double> resid_y, std::span<const double> resid_d);

/// Per-observation pseudo-outcomes used to score candidate splits: with
/// node effect theta and A = mean(resid_d^2),
///   rho_i = resid_d_i * (resid_y_i - resid_d_i * theta) / A.
/// A split is scored by (sum_L rho)^2/|L| + (sum_R rho)^2/|R|.
std::vector<double> split_gradients(std::span<const int> rows,
                                    std::span<const double> resid_y,
                                    std::span<const double> resid_d);

struct CausalNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double theta = 0.0;
  int n_treated = 0;
  int n_control = 0;

  bool is_leaf() const { return feature < 0; }
};

struct CausalTree {
  std::vector<CausalNode> nodes;
  std::vector<int> structure_rows;
  std::vector<int> estimation_rows;
  std::vector<int> subsample_clusters;
  bool degenerate = false;

  const CausalNode& leaf_for(std::span<const double> x) const;
};

class CausalForest {
 public:
  CausalForest() = default;
  CausalForest(ForestParams params, std::size_t n_features, std::vector<CausalTree> trees,
               std::uint64_t nuisance_hash)
      : params_(params), n_features_(n_features), trees_(std::move(trees)),
        nuisance_hash_(nuisance_hash) {}

  /// Average leaf effect over non-degenerate trees. Throws when every
  /// tree is degenerate.
  std::vector<double> predict_cate(const Matrix& X) const;

  /// Out-of-bag variant for training rows: averages only trees whose
  /// subsample excluded the row's cluster. Rows covered by no tree fall
  /// back to the all-tree average; the returned counts report coverage.
  std::pair<std::vector<double>, std::vector<int>> predict_cate_oob(
      const Matrix& X, std::span<const int> clusters) const;

  const std::vector<CausalTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_degenerate() const;
  std::uint64_t nuisance_hash() const { return nuisance_hash_; }

  std::string to_json() const;
  static CausalForest from_json(const std::string& text);

 private:
  ForestParams params_;
  std::size_t n_features_ = 0;
  std::vector<CausalTree> trees_;
  std::uint64_t nuisance_hash_ = 0;
};

/// Grow one honest causal tree on the given subsample rows. Exposed for
/// tests; fit_causal_forest drives it.
CausalTree grow_causal_tree(const Matrix& X, std::span<const double> resid_y,
                            std::span<const double> resid_d,
                            std::span<const std::int8_t> treatment,
                            std::span<const int> clusters, std::vector<int> subsample_rows,
                            std::vector<int> subsample_clusters, const ForestParams& params,
                            std::mt19937_64& rng);

/// Honest causal forest on Robinson residuals y - mu_hat and d - p_hat.
CausalForest fit_causal_forest(const Matrix& X, std::span<const double> y,
                               std::span<const std::int8_t> treatment,
                               std::span<const int> clusters,
                               const NuisanceEstimates& nuisances,
                               const ForestParams& params);

struct Histogram {
  std::vector<double> edges;   // size bins + 1
  std::vector<std::size_t> counts;
};

Histogram cate_histogram(std::span<const double> psi, double bin_width);

std::string histogram_csv(const Histogram& h);

}  // namespace ccf
