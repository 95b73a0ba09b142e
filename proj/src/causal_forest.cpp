#include "ccf/causal_forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ccf/csv.hpp"
#include "ccf/rng.hpp"
#include "forest_internal.hpp"

namespace ccf {

void NuisanceEstimates::validate(std::size_t n) const {
  if (p_hat.size() != n || mu_hat.size() != n || mu1_hat.size() != n ||
      mu0_hat.size() != n)
    throw std::invalid_argument("nuisances: length mismatch");
  for (double p : p_hat)
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("nuisances: propensity outside (0,1); clamp upstream");
}

std::uint64_t NuisanceEstimates::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::vector<double>& v) {
    for (double d : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      h = (h ^ bits) * 0x100000001b3ULL;
    }
  };
  mix(p_hat);
  mix(mu_hat);
  mix(mu1_hat);
  mix(mu0_hat);
  return h;
}

double robinson_theta(std::span<const double> resid_y, std::span<const double> resid_d) {
  if (resid_y.size() != resid_d.size() || resid_y.empty())
    throw std::invalid_argument("robinson_theta: bad input lengths");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < resid_y.size(); ++i) {
    num += resid_d[i] * resid_y[i];
    den += resid_d[i] * resid_d[i];
  }
  if (den <= 0.0) throw std::invalid_argument("no treatment variation");
  return num / den;
}

std::vector<double> split_gradients(std::span<const int> rows,
                                    std::span<const double> resid_y,
                                    std::span<const double> resid_d) {
  double num = 0, den = 0;
  for (int r : rows) {
    auto i = static_cast<std::size_t>(r);
    num += resid_d[i] * resid_y[i];
    den += resid_d[i] * resid_d[i];
  }
  if (den <= 0.0) throw std::invalid_argument("no treatment variation");
  const double theta = num / den;
  const double a = den / static_cast<double>(rows.size());
  std::vector<double> rho(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto i = static_cast<std::size_t>(rows[j]);
    rho[j] = resid_d[i] * (resid_y[i] - resid_d[i] * theta) / a;
  }
  return rho;
}

const CausalNode& CausalTree::leaf_for(std::span<const double> x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = (x[static_cast<std::size_t>(n.feature)] <= n.threshold) ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)];
}

namespace {

struct CausalSplit {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

struct CausalBuilder {
  const Matrix& X;
  std::span<const double> resid_y;
  std::span<const double> resid_d;
  std::span<const std::int8_t> treatment;
  const ForestParams& params;
  int mtry;
  std::mt19937_64& rng;
  CausalTree tree;

  void make_leaf(int id, const std::vector<int>& est) {
    auto& n = tree.nodes[static_cast<std::size_t>(id)];
    std::vector<double> ry, rd;
    for (int r : est) {
      auto i = static_cast<std::size_t>(r);
      ry.push_back(resid_y[i]);
      rd.push_back(resid_d[i]);
      if (treatment[i]) ++n.n_treated;
      else ++n.n_control;
    }
    n.theta = est.empty() ? 0.0 : robinson_theta(ry, rd);
  }

  CausalSplit find_split(const std::vector<int>& structure, const std::vector<int>& est) {
    std::vector<double> rho;
    try {
      rho = split_gradients(structure, resid_y, resid_d);
    } catch (const std::invalid_argument&) {
      return {};  // no treatment variation: leaf
    }
    const auto ns = structure.size();
    const auto min_child =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     params.min_child_share * static_cast<double>(ns)));

    auto features = detail::sample_features(rng, static_cast<int>(X.cols), mtry);
    CausalSplit best;

    std::vector<std::pair<double, double>> sv(ns);         // (x, rho)
    std::vector<std::pair<double, int>> ev(est.size());    // (x, treated)
    for (int f : features) {
      auto fu = static_cast<std::size_t>(f);
      for (std::size_t i = 0; i < ns; ++i)
        sv[i] = {X(static_cast<std::size_t>(structure[i]), fu), rho[i]};
      std::sort(sv.begin(), sv.end());
      if (sv.front().first == sv.back().first) continue;
      for (std::size_t i = 0; i < est.size(); ++i) {
        auto r = static_cast<std::size_t>(est[i]);
        ev[i] = {X(r, fu), treatment[r]};
      }
      std::sort(ev.begin(), ev.end());

      int total_t = 0;
      for (auto& [x, t] : ev) total_t += t;
      const int total_c = static_cast<int>(ev.size()) - total_t;

      double rho_total = 0;
      for (std::size_t i = 0; i < ns; ++i) rho_total += sv[i].second;

      double left_rho = 0;
      std::size_t ei = 0;
      int left_t = 0, left_c = 0;
      for (std::size_t i = 1; i < ns; ++i) {
        left_rho += sv[i - 1].second;
        if (sv[i - 1].first == sv[i].first) continue;
        const double thr = 0.5 * (sv[i - 1].first + sv[i].first);
        while (ei < ev.size() && ev[ei].first <= thr) {
          if (ev[ei].second) ++left_t;
          else ++left_c;
          ++ei;
        }
        if (i < min_child || ns - i < min_child) continue;
        if (left_t < params.min_leaf || left_c < params.min_leaf) continue;
        if (total_t - left_t < params.min_leaf || total_c - left_c < params.min_leaf)
          continue;
        const double right_rho = rho_total - left_rho;
        const double score = left_rho * left_rho / static_cast<double>(i) +
                             right_rho * right_rho / static_cast<double>(ns - i);
        if (score > best.score) {
          best.feature = f;
          best.threshold = thr;
          best.score = score;
        }
      }
    }
    // parent criterion value; a split must strictly improve on it
    double rho_sum = 0;
    for (double v : rho) rho_sum += v;
    if (best.feature >= 0 &&
        best.score <= rho_sum * rho_sum / static_cast<double>(ns))
      best.feature = -1;
    return best;
  }

  int build(std::vector<int> structure, std::vector<int> est) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    CausalSplit split;
    if (!structure.empty()) split = find_split(structure, est);
    if (split.feature < 0) {
      make_leaf(id, est);
      return id;
    }

    auto fu = static_cast<std::size_t>(split.feature);
    std::vector<int> sl, sr, el, er;
    for (int r : structure)
      (X(static_cast<std::size_t>(r), fu) <= split.threshold ? sl : sr).push_back(r);
    for (int r : est)
      (X(static_cast<std::size_t>(r), fu) <= split.threshold ? el : er).push_back(r);
    structure.clear();
    est.clear();
    const int l = build(std::move(sl), std::move(el));
    const int r = build(std::move(sr), std::move(er));
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

CausalTree grow_causal_tree(const Matrix& X, std::span<const double> resid_y,
                            std::span<const double> resid_d,
                            std::span<const std::int8_t> treatment,
                            std::span<const int> clusters, std::vector<int> subsample_rows,
                            std::vector<int> subsample_clusters, const ForestParams& params,
                            std::mt19937_64& rng) {
  const int mtry = params.mtry > 0 ? std::min<int>(params.mtry, static_cast<int>(X.cols))
                                   : default_mtry(static_cast<int>(X.cols));
  CausalTree tree;
  tree.subsample_clusters = std::move(subsample_clusters);

  bool has_t = false, has_c = false;
  for (int r : subsample_rows)
    (treatment[static_cast<std::size_t>(r)] ? has_t : has_c) = true;
  if (!has_t || !has_c || subsample_rows.size() < 2) {
    tree.degenerate = true;
    tree.nodes.emplace_back();
    return tree;
  }

  auto [structure, est] = detail::split_half_by_cluster(rng, subsample_rows, clusters);
  bool est_t = false, est_c = false;
  for (int r : est) (treatment[static_cast<std::size_t>(r)] ? est_t : est_c) = true;
  if (est.empty() || !(est_t || est_c)) {
    tree.degenerate = true;
    tree.nodes.emplace_back();
    return tree;
  }

  CausalBuilder b{X, resid_y, resid_d, treatment, params, mtry, rng, {}};
  b.build(structure, est);
  b.tree.structure_rows = std::move(structure);
  b.tree.estimation_rows = std::move(est);
  b.tree.subsample_clusters = std::move(tree.subsample_clusters);
  return b.tree;
}

CausalForest fit_causal_forest(const Matrix& X, std::span<const double> y,
                               std::span<const std::int8_t> treatment,
                               std::span<const int> clusters,
                               const NuisanceEstimates& nuisances,
                               const ForestParams& params) {
  const std::size_t n = X.rows;
  if (y.size() != n || treatment.size() != n || clusters.size() != n)
    throw std::invalid_argument("fit_causal_forest: length mismatch");
  nuisances.validate(n);

  std::vector<double> resid_y(n), resid_d(n);
  for (std::size_t i = 0; i < n; ++i) {
    resid_y[i] = y[i] - nuisances.mu_hat[i];
    resid_d[i] = static_cast<double>(treatment[i]) - nuisances.p_hat[i];
  }

  const auto all_clusters = detail::unique_clusters(clusters);
  std::vector<CausalTree> trees(static_cast<std::size_t>(params.num_trees));
  detail::parallel_for(trees.size(), params.n_threads, [&](std::size_t t) {
    auto rng = make_rng(params.seed, t);
    auto chosen = detail::sample_clusters(rng, all_clusters, params.subsample_fraction);
    auto rows = detail::rows_of_clusters(clusters, chosen);
    trees[t] = grow_causal_tree(X, resid_y, resid_d, treatment, clusters,
                                std::move(rows), std::move(chosen), params, rng);
  });
  return CausalForest(params, X.cols, std::move(trees), nuisances.content_hash());
}

std::size_t CausalForest::n_degenerate() const {
  std::size_t d = 0;
  for (const auto& t : trees_)
    if (t.degenerate) ++d;
  return d;
}

std::vector<double> CausalForest::predict_cate(const Matrix& X) const {
  if (n_degenerate() == trees_.size())
    throw std::runtime_error("predict_cate: all trees degenerate");
  std::vector<double> out(X.rows, 0.0);
  for (std::size_t i = 0; i < X.rows; ++i) {
    double s = 0;
    std::size_t m = 0;
    for (const auto& t : trees_) {
      if (t.degenerate) continue;
      s += t.leaf_for(X.row(i)).theta;
      ++m;
    }
    out[i] = s / static_cast<double>(m);
  }
  return out;
}

std::pair<std::vector<double>, std::vector<int>> CausalForest::predict_cate_oob(
    const Matrix& X, std::span<const int> clusters) const {
  if (n_degenerate() == trees_.size())
    throw std::runtime_error("predict_cate: all trees degenerate");
  std::vector<double> out(X.rows, 0.0);
  std::vector<int> cover(X.rows, 0);
  std::vector<double> fallback;
  for (std::size_t i = 0; i < X.rows; ++i) {
    double s = 0;
    int m = 0;
    for (const auto& t : trees_) {
      if (t.degenerate) continue;
      if (std::binary_search(t.subsample_clusters.begin(), t.subsample_clusters.end(),
                             clusters[i]))
        continue;
      s += t.leaf_for(X.row(i)).theta;
      ++m;
    }
    if (m > 0) {
      out[i] = s / m;
      cover[i] = m;
    } else {
      if (fallback.empty()) fallback = predict_cate(X);
      out[i] = fallback[i];
    }
  }
  return {std::move(out), std::move(cover)};
}

Histogram cate_histogram(std::span<const double> psi, double bin_width) {
  if (psi.empty()) throw std::invalid_argument("cate_histogram: empty input");
  if (!(bin_width > 0)) throw std::invalid_argument("cate_histogram: bin_width must be > 0");
  const auto [mn_it, mx_it] = std::minmax_element(psi.begin(), psi.end());
  const double lo = std::floor(*mn_it / bin_width) * bin_width;
  auto bins = static_cast<std::size_t>(std::floor((*mx_it - lo) / bin_width)) + 1;
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b)
    h.edges.push_back(lo + static_cast<double>(b) * bin_width);
  for (double v : psi) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / bin_width));
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out += csv::fmt_g6(h.edges[b]);
    out += ',';
    out += csv::fmt_g6(h.edges[b + 1]);
    out += ',';
    out += std::to_string(h.counts[b]);
    out += '\n';
  }
  return out;
}

using nlohmann::json;

std::string CausalForest::to_json() const {
  json j;
  j["format"] = "ccf.causal_forest";
  j["version"] = 1;
  j["params"] = json{{"num_trees", params_.num_trees},
                     {"subsample_fraction", params_.subsample_fraction},
                     {"mtry", params_.mtry},
                     {"min_leaf", params_.min_leaf},
                     {"honesty", params_.honesty},
                     {"min_child_share", params_.min_child_share},
                     {"seed", params_.seed},
                     {"n_threads", params_.n_threads}};
  j["n_features"] = n_features_;
  j["nuisance_hash"] = nuisance_hash_;
  json trees = json::array();
  for (const auto& t : trees_) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.theta, n.n_treated,
                       n.n_control});
    trees.push_back({{"nodes", std::move(nodes)},
                     {"clusters", t.subsample_clusters},
                     {"degenerate", t.degenerate}});
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

CausalForest CausalForest::from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("format") != "ccf.causal_forest" || j.at("version") != 1)
    throw std::runtime_error("unsupported forest document");
  ForestParams p;
  const auto& jp = j.at("params");
  p.num_trees = jp.at("num_trees");
  p.subsample_fraction = jp.at("subsample_fraction");
  p.mtry = jp.at("mtry");
  p.min_leaf = jp.at("min_leaf");
  p.honesty = jp.at("honesty");
  p.min_child_share = jp.at("min_child_share");
  p.seed = jp.at("seed");
  p.n_threads = jp.at("n_threads");
  std::vector<CausalTree> trees;
  for (const auto& jt : j.at("trees")) {
    CausalTree t;
    for (const auto& jn : jt.at("nodes")) {
      CausalNode n;
      n.feature = jn.at(0);
      n.threshold = jn.at(1);
      n.left = jn.at(2);
      n.right = jn.at(3);
      n.theta = jn.at(4);
      n.n_treated = jn.at(5);
      n.n_control = jn.at(6);
      t.nodes.push_back(n);
    }
    t.subsample_clusters = jt.at("clusters").get<std::vector<int>>();
    t.degenerate = jt.at("degenerate");
    trees.push_back(std::move(t));
  }
  return CausalForest(p, j.at("n_features"), std::move(trees), j.at("nuisance_hash"));
}

}  // namespace ccf
