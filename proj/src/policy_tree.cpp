#include "ccf/policy_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ccf/csv.hpp"

namespace ccf {

double bin_expenditure(double value, const BinningRule& rule) {
  if (value < 0) throw std::invalid_argument("bin_expenditure: negative input");
  if (value >= rule.top_break) return rule.top_break;  // single top category
  const double step = value < rule.mid_break ? rule.low_step : rule.high_step;
  return std::floor(value / step + 0.5) * step;  // half-up
}

std::vector<double> bin_expenditures(std::span<const double> values,
                                     const BinningRule& rule) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(bin_expenditure(v, rule));
  return out;
}

int PolicyTree::action_for(std::span<const double> x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = (x[static_cast<std::size_t>(n.feature)] <= n.threshold) ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].action;
}

double policy_value(std::span<const int> actions, std::span<const double> psi) {
  if (actions.size() != psi.size() || psi.empty())
    throw std::invalid_argument("policy_value: empty or mismatched input");
  double s = 0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    s += (actions[i] ? 1.0 : -1.0) * psi[i];
  return s / static_cast<double>(psi.size());
}

namespace {

/// Per-feature discretization: level code per row, sorted unique values.
struct Discretized {
  std::vector<std::vector<int>> codes;       // [feature][row]
  std::vector<std::vector<double>> values;   // [feature][level]
};

Discretized discretize(const Matrix& X) {
  Discretized d;
  d.codes.resize(X.cols);
  d.values.resize(X.cols);
  for (std::size_t f = 0; f < X.cols; ++f) {
    std::vector<double> vals;
    vals.reserve(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) vals.push_back(X(i, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    d.values[f] = vals;
    d.codes[f].resize(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i)
      d.codes[f][i] = static_cast<int>(
          std::lower_bound(vals.begin(), vals.end(), X(i, f)) - vals.begin());
  }
  return d;
}

/// Subtree described relative to its own root; grafted into the final
/// node array once the search settles.
struct Solution {
  double total = -std::numeric_limits<double>::infinity();  // sum, not mean
  std::vector<PolicyNode> nodes;
  int depth_used = 0;
};

Solution leaf_solution(double sum) {
  Solution s;
  PolicyNode leaf;
  // action 0 wins ties
  if (sum > 0) {
    leaf.action = 1;
    s.total = sum;
  } else {
    leaf.action = 0;
    s.total = -sum;
  }
  s.nodes.push_back(leaf);
  return s;
}

struct Searcher {
  const Discretized& d;
  std::span<const double> psi;
  std::size_t n_features;

  Solution solve(const std::vector<int>& rows, int depth) {
    double sum = 0;
    for (int r : rows) sum += psi[static_cast<std::size_t>(r)];
    Solution best = leaf_solution(sum);
    if (depth <= 0 || rows.size() < 2) return best;

    if (depth == 1) {
      depth_one(rows, sum, best);
      return best;
    }

    std::vector<double> level_sum;
    std::vector<int> level_cnt;
    for (std::size_t f = 0; f < n_features; ++f) {
      const auto& code = d.codes[f];
      const auto L = d.values[f].size();
      level_cnt.assign(L, 0);
      for (int r : rows) ++level_cnt[static_cast<std::size_t>(code[static_cast<std::size_t>(r)])];

      std::vector<int> left, right;
      for (std::size_t v = 0; v + 1 < L; ++v) {
        if (level_cnt[v] == 0) continue;
        // any rows strictly above level v?
        bool above = false;
        for (std::size_t w = v + 1; w < L; ++w)
          if (level_cnt[w] > 0) { above = true; break; }
        if (!above) break;

        left.clear();
        right.clear();
        for (int r : rows)
          (code[static_cast<std::size_t>(r)] <= static_cast<int>(v) ? left : right)
              .push_back(r);
        Solution ls = solve(left, depth - 1);
        Solution rs = solve(right, depth - 1);
        if (ls.total + rs.total > best.total)
          best = graft(f, d.values[f][v], std::move(ls), std::move(rs));
      }
    }
    return best;
  }

  /// Depth-1 fast path via per-level reward sums.
  void depth_one(const std::vector<int>& rows, double total_sum, Solution& best) {
    std::vector<double> level_sum;
    std::vector<int> level_cnt;
    for (std::size_t f = 0; f < n_features; ++f) {
      const auto& code = d.codes[f];
      const auto L = d.values[f].size();
      level_sum.assign(L, 0.0);
      level_cnt.assign(L, 0);
      for (int r : rows) {
        auto c = static_cast<std::size_t>(code[static_cast<std::size_t>(r)]);
        level_sum[c] += psi[static_cast<std::size_t>(r)];
        ++level_cnt[c];
      }
      double left_sum = 0;
      long left_cnt = 0;
      for (std::size_t v = 0; v + 1 < L; ++v) {
        left_sum += level_sum[v];
        left_cnt += level_cnt[v];
        if (left_cnt == 0 || left_cnt == static_cast<long>(rows.size())) continue;
        const double right_sum = total_sum - left_sum;
        const double value = std::fabs(left_sum) + std::fabs(right_sum);
        if (value > best.total) {
          Solution ls = leaf_solution(left_sum);
          Solution rs = leaf_solution(right_sum);
          best = graft(f, d.values[f][v], std::move(ls), std::move(rs));
        }
      }
    }
  }

  Solution graft(std::size_t feature, double threshold, Solution ls, Solution rs) {
    Solution s;
    s.total = ls.total + rs.total;
    s.depth_used = 1 + std::max(ls.depth_used, rs.depth_used);
    PolicyNode root;
    root.feature = static_cast<int>(feature);
    root.threshold = threshold;
    root.left = 1;
    root.right = 1 + static_cast<int>(ls.nodes.size());
    s.nodes.push_back(root);
    for (auto n : ls.nodes) {
      if (!n.is_leaf()) {
        n.left += 1;
        n.right += 1;
      }
      s.nodes.push_back(n);
    }
    const int off = 1 + static_cast<int>(ls.nodes.size());
    for (auto n : rs.nodes) {
      if (!n.is_leaf()) {
        n.left += off;
        n.right += off;
      }
      s.nodes.push_back(n);
    }
    return s;
  }
};

}  // namespace

PolicyFit fit_policy_tree(const Matrix& X, std::span<const double> psi, int depth) {
  if (X.rows != psi.size() || psi.empty())
    throw std::invalid_argument("fit_policy_tree: empty or mismatched input");
  if (depth < 0) throw std::invalid_argument("fit_policy_tree: depth must be >= 0");

  Discretized d = discretize(X);
  Searcher searcher{d, psi, X.cols};
  std::vector<int> rows(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) rows[i] = static_cast<int>(i);
  Solution s = searcher.solve(rows, depth);

  PolicyFit fit;
  fit.tree.depth = depth;
  fit.tree.depth_used = s.depth_used;
  fit.tree.nodes = std::move(s.nodes);
  fit.value = s.total / static_cast<double>(psi.size());
  return fit;
}

std::vector<int> apply_policy(const PolicyTree& tree, const Matrix& X) {
  std::vector<int> out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) out[i] = tree.action_for(X.row(i));
  return out;
}

namespace {

void rules(const PolicyTree& t, int id, const std::vector<std::string>& names,
           std::vector<std::string>& path, std::ostringstream& out) {
  const auto& n = t.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) {
    out << "if ";
    if (path.empty()) out << "always";
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i) out << " and ";
      out << path[i];
    }
    out << " -> " << (n.action ? "treat" : "no coupon") << '\n';
    return;
  }
  const std::string& f = names[static_cast<std::size_t>(n.feature)];
  path.push_back(f + " <= " + csv::fmt_g6(n.threshold));
  rules(t, n.left, names, path, out);
  path.back() = f + " > " + csv::fmt_g6(n.threshold);
  rules(t, n.right, names, path, out);
  path.pop_back();
}

}  // namespace

std::string policy_tree_text(const PolicyTree& tree,
                             const std::vector<std::string>& feature_names) {
  std::ostringstream out;
  std::vector<std::string> path;
  rules(tree, 0, feature_names, path, out);
  return out.str();
}

std::string policy_tree_dot(const PolicyTree& tree,
                            const std::vector<std::string>& feature_names) {
  std::ostringstream out;
  out << "digraph policy {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.is_leaf()) {
      out << "  n" << i << " [label=\"" << (n.action ? "treat" : "no coupon")
          << "\", style=filled, fillcolor=\"" << (n.action ? "#c8e6c9" : "#ffcdd2")
          << "\"];\n";
    } else {
      out << "  n" << i << " [label=\""
          << feature_names[static_cast<std::size_t>(n.feature)]
          << " <= " << csv::fmt_g6(n.threshold) << "\"];\n";
      out << "  n" << i << " -> n" << n.left << " [label=\"yes\"];\n";
      out << "  n" << i << " -> n" << n.right << " [label=\"no\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::string policy_tree_json(const PolicyTree& tree,
                             const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["depth"] = tree.depth;
  j["depth_used"] = tree.depth_used;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"action", n.action}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"feature_name", feature_names[static_cast<std::size_t>(n.feature)]},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right}});
    }
  }
  j["nodes"] = std::move(nodes);
  return j.dump(2);
}

}  // namespace ccf
