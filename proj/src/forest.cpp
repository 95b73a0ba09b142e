#include "ccf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ccf/rng.hpp"
#include "forest_internal.hpp"

namespace ccf {

int default_mtry(int k) {
  if (k < 1) throw std::invalid_argument("default_mtry: need at least one feature");
  int m = static_cast<int>(std::floor(std::sqrt(static_cast<double>(k)) + 20.0));
  return std::min(m, k);
}

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = (x[static_cast<std::size_t>(n.feature)] <= n.threshold) ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].prediction;
}

double RegressionForest::predict(std::span<const double> x) const {
  double s = 0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

std::vector<double> RegressionForest::predict(const Matrix& X) const {
  std::vector<double> out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict(X.row(i));
  return out;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

/// Best SSE-reduction split over the given features; strict-improvement
/// updates keep the lowest feature index / lowest threshold on ties.
SplitChoice best_sse_split(const Matrix& X, std::span<const double> y,
                           const std::vector<int>& rows,
                           const std::vector<int>& features, int min_leaf) {
  const auto n = rows.size();
  double total = 0;
  for (int r : rows) total += y[static_cast<std::size_t>(r)];

  SplitChoice best;
  std::vector<std::pair<double, double>> vals(n);  // (x, y)
  for (int f : features) {
    for (std::size_t i = 0; i < n; ++i) {
      auto r = static_cast<std::size_t>(rows[i]);
      vals[i] = {X(r, static_cast<std::size_t>(f)), y[r]};
    }
    std::sort(vals.begin(), vals.end());
    double left_sum = 0;
    for (std::size_t i = 1; i < n; ++i) {
      left_sum += vals[i - 1].second;
      if (vals[i - 1].first == vals[i].first) continue;
      if (i < static_cast<std::size_t>(min_leaf) ||
          n - i < static_cast<std::size_t>(min_leaf))
        continue;
      const double right_sum = total - left_sum;
      const double score = left_sum * left_sum / static_cast<double>(i) +
                           right_sum * right_sum / static_cast<double>(n - i);
      if (score > best.score) {
        best.feature = f;
        best.threshold = 0.5 * (vals[i - 1].first + vals[i].first);
        best.score = score;
      }
    }
  }
  // require strict SSE reduction over keeping the node whole
  if (best.feature >= 0 &&
      best.score <= total * total / static_cast<double>(n))
    best.feature = -1;
  return best;
}

double mean_of(std::span<const double> y, const std::vector<int>& rows) {
  double s = 0;
  for (int r : rows) s += y[static_cast<std::size_t>(r)];
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

struct TreeBuilder {
  const Matrix& X;
  std::span<const double> y;
  const ForestParams& params;
  int mtry;
  std::mt19937_64& rng;
  RegressionTree tree;

  int build(std::vector<int> rows) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().prediction = mean_of(y, rows);
    if (rows.size() < 2 * static_cast<std::size_t>(params.min_leaf)) return id;

    auto features = detail::sample_features(rng, static_cast<int>(X.cols), mtry);
    auto split = best_sse_split(X, y, rows, features, params.min_leaf);
    if (split.feature < 0) return id;

    std::vector<int> left, right;
    for (int r : rows) {
      if (X(static_cast<std::size_t>(r), static_cast<std::size_t>(split.feature)) <=
          split.threshold)
        left.push_back(r);
      else
        right.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(left));
    const int r = build(std::move(right));
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

/// Replace leaf predictions by means of the estimation rows reaching each
/// leaf (honest trees). Leaves no estimation row reaches keep the
/// structure-sample mean.
void repopulate_leaves(RegressionTree& tree, const Matrix& X, std::span<const double> y,
                       const std::vector<int>& est_rows) {
  std::vector<double> sum(tree.nodes.size(), 0.0);
  std::vector<int> cnt(tree.nodes.size(), 0);
  for (int r : est_rows) {
    auto row = X.row(static_cast<std::size_t>(r));
    int i = 0;
    while (!tree.nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = tree.nodes[static_cast<std::size_t>(i)];
      i = (row[static_cast<std::size_t>(n.feature)] <= n.threshold) ? n.left : n.right;
    }
    sum[static_cast<std::size_t>(i)] += y[static_cast<std::size_t>(r)];
    cnt[static_cast<std::size_t>(i)] += 1;
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (tree.nodes[i].is_leaf() && cnt[i] > 0)
      tree.nodes[i].prediction = sum[i] / cnt[i];
}

}  // namespace

RegressionForest fit_regression_forest(const Matrix& X, std::span<const double> y,
                                       std::span<const int> clusters,
                                       const ForestParams& params) {
  if (X.rows != y.size() || X.rows != clusters.size())
    throw std::invalid_argument("fit_regression_forest: length mismatch");
  if (X.rows < 2 * static_cast<std::size_t>(params.min_leaf))
    throw std::invalid_argument("fit_regression_forest: too few rows");
  const int mtry = params.mtry > 0 ? std::min<int>(params.mtry, static_cast<int>(X.cols))
                                   : default_mtry(static_cast<int>(X.cols));

  const auto all_clusters = detail::unique_clusters(clusters);
  std::vector<RegressionTree> trees(static_cast<std::size_t>(params.num_trees));
  detail::parallel_for(trees.size(), params.n_threads, [&](std::size_t t) {
    auto rng = make_rng(params.seed, t);
    auto chosen = detail::sample_clusters(rng, all_clusters, params.subsample_fraction);
    auto rows = detail::rows_of_clusters(clusters, chosen);

    TreeBuilder b{X, y, params, mtry, rng, {}};
    if (params.honesty && rows.size() >= 4) {
      auto [structure, estimation] = detail::split_half_by_cluster(rng, rows, clusters);
      b.build(std::move(structure));
      repopulate_leaves(b.tree, X, y, estimation);
    } else {
      b.build(std::move(rows));
    }
    b.tree.subsample_clusters = std::move(chosen);
    trees[t] = std::move(b.tree);
  });
  return RegressionForest(params, X.cols, std::move(trees));
}

std::vector<double> crossfit_predict(const Matrix& X, std::span<const double> y,
                                     std::span<const int> clusters,
                                     const ForestParams& params, int folds) {
  if (folds < 2) throw std::invalid_argument("crossfit_predict: folds must be >= 2");
  auto all = detail::unique_clusters(clusters);
  if (all.size() < static_cast<std::size_t>(folds))
    throw std::invalid_argument("crossfit_predict: fewer clusters than folds");

  auto rng = make_rng(params.seed, 0x0f01d5);
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<int> fold_of_cluster;  // indexed by position in sorted unique list
  std::vector<int> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  fold_of_cluster.resize(sorted.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto pos = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), all[i]) - sorted.begin());
    fold_of_cluster[pos] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  auto fold_of_row = [&](std::size_t r) {
    auto pos = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), clusters[r]) - sorted.begin());
    return fold_of_cluster[pos];
  };

  std::vector<double> out(X.rows, 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (std::size_t r = 0; r < X.rows; ++r)
      (fold_of_row(r) == f ? test_rows : train_rows).push_back(static_cast<int>(r));
    if (train_rows.empty() || test_rows.empty()) continue;

    Matrix Xtr = X.take_rows(train_rows);
    std::vector<double> ytr;
    std::vector<int> ctr;
    for (int r : train_rows) {
      ytr.push_back(y[static_cast<std::size_t>(r)]);
      ctr.push_back(clusters[static_cast<std::size_t>(r)]);
    }
    ForestParams fp = params;
    fp.seed = mix_seed(params.seed, 0xc0ffee00ULL + static_cast<std::uint64_t>(f));
    auto forest = fit_regression_forest(Xtr, ytr, ctr, fp);
    for (int r : test_rows)
      out[static_cast<std::size_t>(r)] = forest.predict(X.row(static_cast<std::size_t>(r)));
  }
  return out;
}

std::vector<double> clamp_propensity(std::vector<double> p, double lo, double hi) {
  for (double& v : p) v = std::clamp(v, lo, hi);
  return p;
}

using nlohmann::json;

namespace {

json params_to_json(const ForestParams& p) {
  return json{{"num_trees", p.num_trees},
              {"subsample_fraction", p.subsample_fraction},
              {"mtry", p.mtry},
              {"min_leaf", p.min_leaf},
              {"honesty", p.honesty},
              {"min_child_share", p.min_child_share},
              {"seed", p.seed},
              {"n_threads", p.n_threads}};
}

ForestParams params_from_json(const json& j) {
  ForestParams p;
  p.num_trees = j.at("num_trees");
  p.subsample_fraction = j.at("subsample_fraction");
  p.mtry = j.at("mtry");
  p.min_leaf = j.at("min_leaf");
  p.honesty = j.at("honesty");
  p.min_child_share = j.at("min_child_share");
  p.seed = j.at("seed");
  p.n_threads = j.at("n_threads");
  return p;
}

}  // namespace

std::string RegressionForest::to_json() const {
  json j;
  j["format"] = "ccf.regression_forest";
  j["version"] = 1;
  j["params"] = params_to_json(params_);
  j["n_features"] = n_features_;
  json trees = json::array();
  for (const auto& t : trees_) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.prediction});
    trees.push_back({{"nodes", std::move(nodes)}, {"clusters", t.subsample_clusters}});
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

RegressionForest RegressionForest::from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("format") != "ccf.regression_forest" || j.at("version") != 1)
    throw std::runtime_error("unsupported forest document");
  std::vector<RegressionTree> trees;
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt.at("nodes")) {
      TreeNode n;
      n.feature = jn.at(0);
      n.threshold = jn.at(1);
      n.left = jn.at(2);
      n.right = jn.at(3);
      n.prediction = jn.at(4);
      t.nodes.push_back(n);
    }
    t.subsample_clusters = jt.at("clusters").get<std::vector<int>>();
    trees.push_back(std::move(t));
  }
  return RegressionForest(params_from_json(j.at("params")), j.at("n_features"),
                          std::move(trees));
}

}  // namespace ccf
