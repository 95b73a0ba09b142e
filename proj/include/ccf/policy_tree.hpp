#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccf/matrix.hpp"

namespace ccf {

/// Default depth of the targeting trees fitted by the toolkit.
inline constexpr int kDefaultPolicyDepth = 3;

/// Piecewise rounding of pre-campaign expenditures: nearest 50 below
/// mid_break, nearest 100 up to top_break, everything above collapsed
/// into one top category.
struct BinningRule {
  double low_step = 50.0;
  double high_step = 100.0;
  double mid_break = 1000.0;
  double top_break = 2000.0;
};

/// Half-up rounding per rule; idempotent. Throws on negative input.
double bin_expenditure(double value, const BinningRule& rule = {});

std::vector<double> bin_expenditures(std::span<const double> values,
                                     const BinningRule& rule = {});

struct PolicyNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // goes left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int action = 0;  // leaves only: 1 = treat, 0 = no coupon

  bool is_leaf() const { return feature < 0; }
};

struct PolicyTree {
  int depth = 0;       // requested depth
  int depth_used = 0;  // deepest split actually taken
  std::vector<PolicyNode> nodes;  // nodes[0] is the root

  int action_for(std::span<const double> x) const;
};

/// Mean of (2 pi_i - 1) * psi_i; the empirical policy-value objective.
double policy_value(std::span<const int> actions, std::span<const double> psi);

struct PolicyFit {
  PolicyTree tree;
  double value = 0.0;
};

/// Exact maximizer of the policy value over axis-aligned trees up to the
/// given depth, thresholds at observed values. Deterministic tie-break:
/// shallower tree, then lowest feature index, then lowest threshold;
/// value-tied leaves take action 0.
PolicyFit fit_policy_tree(const Matrix& X, std::span<const double> psi, int depth);

std::vector<int> apply_policy(const PolicyTree& tree, const Matrix& X);

std::string policy_tree_text(const PolicyTree& tree,
                             const std::vector<std::string>& feature_names);
std::string policy_tree_dot(const PolicyTree& tree,
                            const std::vector<std::string>& feature_names);
std::string policy_tree_json(const PolicyTree& tree,
                             const std::vector<std::string>& feature_names);

}  // namespace ccf
