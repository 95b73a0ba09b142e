#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "ccf/causal_forest.hpp"
#include "ccf/rng.hpp"

using namespace ccf;

TEST_CASE("robinson_theta: exact fit") {
  std::vector<double> ry = {2, -2}, rd = {1, -1};
  CHECK(robinson_theta(ry, rd) == doctest::Approx(2.0));
}

TEST_CASE("robinson_theta: zero outcome residuals give zero") {
  std::vector<double> ry = {0, 0, 0}, rd = {0.5, -0.5, 0.25};
  CHECK(robinson_theta(ry, rd) == 0.0);
}

TEST_CASE("robinson_theta: matches the normal-equations oracle") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  std::vector<double> ry(50), rd(50);
  for (int i = 0; i < 50; ++i) {
    ry[static_cast<std::size_t>(i)] = g(rng);
    rd[static_cast<std::size_t>(i)] = g(rng);
  }
  // independent closed-form computation
  long double num = 0, den = 0;
  for (int i = 0; i < 50; ++i) {
    num += static_cast<long double>(rd[static_cast<std::size_t>(i)]) *
           ry[static_cast<std::size_t>(i)];
    den += static_cast<long double>(rd[static_cast<std::size_t>(i)]) *
           rd[static_cast<std::size_t>(i)];
  }
  const double oracle = static_cast<double>(num / den);
  CHECK(robinson_theta(ry, rd) ==
        doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("robinson_theta: no treatment variation is an error") {
  std::vector<double> ry = {1, 2}, rd = {0, 0};
  CHECK_THROWS_WITH_AS(robinson_theta(ry, rd), "no treatment variation",
                       std::invalid_argument);
}

TEST_CASE("split_gradients: homogeneous node has all-zero gradients") {
  std::vector<double> rd = {0.5, -0.5, 0.3, -0.3};
  std::vector<double> ry;
  for (double d : rd) ry.push_back(4.0 * d);  // exact theta = 4
  std::vector<int> rows = {0, 1, 2, 3};
  auto rho = split_gradients(rows, ry, rd);
  for (double r : rho) CHECK(r == doctest::Approx(0.0));
}

TEST_CASE("split_gradients: gradients sum to zero over the node") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> ry(40), rd(40);
  std::vector<int> rows;
  for (int i = 0; i < 40; ++i) {
    ry[static_cast<std::size_t>(i)] = g(rng);
    rd[static_cast<std::size_t>(i)] = g(rng);
    rows.push_back(i);
  }
  auto rho = split_gradients(rows, ry, rd);
  double s = 0;
  for (double r : rho) s += r;
  CHECK(s == doctest::Approx(0.0).epsilon(1e-9));
}

namespace {

/// Noiseless two-effect population separated on x1; clusters singleton.
struct TwoEffect {
  Matrix X;
  std::vector<double> resid_y, resid_d;
  std::vector<std::int8_t> d;
  std::vector<int> clusters;
  std::vector<int> rows;

  TwoEffect(int n, double theta_lo, double theta_hi) : X(static_cast<std::size_t>(n), 2) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i) {
      auto u = static_cast<std::size_t>(i);
      X(u, 0) = (i < n / 2) ? -1.0 - 0.01 * i : 1.0 + 0.01 * i;
      X(u, 1) = g(rng);
      d.push_back(static_cast<std::int8_t>(i % 2));
      resid_d.push_back(static_cast<double>(d.back()) - 0.5);
      const double theta = X(u, 0) < 0 ? theta_lo : theta_hi;
      resid_y.push_back(theta * resid_d.back());
      clusters.push_back(i);
      rows.push_back(i);
    }
  }
};

}  // namespace

TEST_CASE("split scoring prefers the effect-separating covariate") {
  TwoEffect pop(60, 1.0, 9.0);
  auto rho = split_gradients(pop.rows, pop.resid_y, pop.resid_d);

  // oracle: enumerate every (feature, threshold) split and score by the
  // child-theta difference directly
  int best_feature = -1;
  double best_gap = -1;
  for (int f = 0; f < 2; ++f) {
    std::set<double> values;
    for (int r : pop.rows) values.insert(pop.X(static_cast<std::size_t>(r),
                                               static_cast<std::size_t>(f)));
    for (double v : values) {
      std::vector<double> ly, ld, ryv, rdv;
      for (int r : pop.rows) {
        auto u = static_cast<std::size_t>(r);
        if (pop.X(u, static_cast<std::size_t>(f)) <= v) {
          ly.push_back(pop.resid_y[u]);
          ld.push_back(pop.resid_d[u]);
        } else {
          ryv.push_back(pop.resid_y[u]);
          rdv.push_back(pop.resid_d[u]);
        }
      }
      if (ly.size() < 5 || ryv.size() < 5) continue;
      const double gap =
          std::fabs(robinson_theta(ly, ld) - robinson_theta(ryv, rdv));
      if (gap > best_gap) {
        best_gap = gap;
        best_feature = f;
      }
    }
  }
  CHECK(best_feature == 0);

  // the rho-criterion agrees: the best-scoring split is on x1
  double best_score = -1;
  int chosen = -1;
  for (int f = 0; f < 2; ++f) {
    std::vector<std::pair<double, double>> sv;
    for (std::size_t i = 0; i < pop.rows.size(); ++i)
      sv.emplace_back(pop.X(i, static_cast<std::size_t>(f)), rho[i]);
    std::sort(sv.begin(), sv.end());
    double left = 0, total = 0;
    for (auto& [x, r] : sv) total += r;
    for (std::size_t i = 1; i < sv.size(); ++i) {
      left += sv[i - 1].second;
      if (sv[i - 1].first == sv[i].first) continue;
      double score = left * left / static_cast<double>(i) +
                     (total - left) * (total - left) /
                         static_cast<double>(sv.size() - i);
      if (score > best_score) {
        best_score = score;
        chosen = f;
      }
    }
  }
  CHECK(chosen == 0);
}

namespace {

struct SimplePanel {
  Matrix X;
  std::vector<double> y;
  std::vector<std::int8_t> d;
  std::vector<int> clusters;
  NuisanceEstimates nu;

  SimplePanel(std::size_t n, std::uint64_t seed, double tau_lo, double tau_hi,
              double noise) : X(n, 2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    for (std::size_t i = 0; i < n; ++i) {
      X(i, 0) = g(rng);
      X(i, 1) = g(rng);
      const double p = 0.5;
      d.push_back(static_cast<std::int8_t>(u(rng) < p));
      const double tau = X(i, 0) > 0 ? tau_hi : tau_lo;
      const double base = 10.0 + 2.0 * X(i, 1);
      y.push_back(base + d.back() * tau + noise * g(rng));
      clusters.push_back(static_cast<int>(i / 2));
      nu.p_hat.push_back(p);
      nu.mu_hat.push_back(base + p * tau);
      nu.mu1_hat.push_back(base + tau);
      nu.mu0_hat.push_back(base);
    }
  }
};

ForestParams cf_params(int trees, std::uint64_t seed) {
  ForestParams p;
  p.num_trees = trees;
  p.seed = seed;
  p.n_threads = 2;
  return p;
}

}  // namespace

TEST_CASE("honesty: structure and estimation rows are disjoint, leaves obey 5/5") {
  SimplePanel pop(400, 8, 0.0, 8.0, 1.0);
  auto forest = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu,
                                  cf_params(20, 4));
  for (const auto& t : forest.trees()) {
    if (t.degenerate) continue;
    std::set<int> s(t.structure_rows.begin(), t.structure_rows.end());
    for (int r : t.estimation_rows) CHECK(s.count(r) == 0);

    // leaf thetas recompute exactly from estimation rows only, and any
    // split leaves both children with 5 treated + 5 control estimation rows
    std::vector<std::vector<int>> rows_at(t.nodes.size());
    rows_at[0] = t.estimation_rows;
    for (std::size_t n = 0; n < t.nodes.size(); ++n) {
      const auto& node = t.nodes[n];
      if (node.is_leaf()) {
        int nt = 0, nc = 0;
        std::vector<double> ry, rd;
        for (int r : rows_at[n]) {
          auto u = static_cast<std::size_t>(r);
          (pop.d[u] ? nt : nc) += 1;
          ry.push_back(pop.y[u] - pop.nu.mu_hat[u]);
          rd.push_back(static_cast<double>(pop.d[u]) - pop.nu.p_hat[u]);
        }
        CHECK(nt == node.n_treated);
        CHECK(nc == node.n_control);
        if (!ry.empty()) CHECK(node.theta == doctest::Approx(robinson_theta(ry, rd)));
      } else {
        for (int r : rows_at[n]) {
          auto u = static_cast<std::size_t>(r);
          if (pop.X(u, static_cast<std::size_t>(node.feature)) <= node.threshold)
            rows_at[static_cast<std::size_t>(node.left)].push_back(r);
          else
            rows_at[static_cast<std::size_t>(node.right)].push_back(r);
        }
        for (int child : {node.left, node.right}) {
          int nt = 0, nc = 0;
          for (int r : rows_at[static_cast<std::size_t>(child)])
            (pop.d[static_cast<std::size_t>(r)] ? nt : nc) += 1;
          CHECK(nt >= 5);
          CHECK(nc >= 5);
        }
      }
    }
  }
}

TEST_CASE("pigeonhole: a 9-treated node cannot split into two 5-treated children") {
  // 9 treated, 200 control: every candidate split is rejected, the root
  // stays a leaf
  const std::size_t n = 209;
  Matrix X(n, 1);
  std::vector<double> y;
  std::vector<std::int8_t> d;
  std::vector<int> cl;
  NuisanceEstimates nu;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = g(rng);
    d.push_back(static_cast<std::int8_t>(i < 9));
    y.push_back(g(rng) + 3.0 * d.back());
    cl.push_back(static_cast<int>(i));
    nu.p_hat.push_back(9.0 / 209.0);
    nu.mu_hat.push_back(0.0);
    nu.mu1_hat.push_back(3.0);
    nu.mu0_hat.push_back(0.0);
  }
  ForestParams p = cf_params(40, 6);
  p.subsample_fraction = 1.0;  // keep all rows so the count argument is exact
  auto forest = fit_causal_forest(X, y, d, cl, nu, p);
  for (const auto& t : forest.trees()) {
    if (t.degenerate) continue;
    int est_treated = 0;
    for (int r : t.estimation_rows) est_treated += d[static_cast<std::size_t>(r)];
    if (est_treated < 10) CHECK(t.nodes.size() == 1);
  }
}

TEST_CASE("constant-effect DGP: leaf effects concentrate near the constant") {
  SimplePanel pop(600, 12, 6.0, 6.0, 0.5);
  auto forest = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu,
                                  cf_params(60, 9));
  auto psi = forest.predict_cate(pop.X);
  double mean = 0;
  for (double v : psi) mean += v;
  mean /= static_cast<double>(psi.size());
  // noise 0.5 over hundreds of estimation rows: a generous Monte-Carlo band
  CHECK(mean == doctest::Approx(6.0).epsilon(0.05));
  for (double v : psi) CHECK(std::fabs(v - 6.0) < 2.0);
}

TEST_CASE("degenerate subsamples are excluded from averaging") {
  CausalForest f = CausalForest::from_json(CausalForest(
      ForestParams{}, 1,
      [] {
        std::vector<CausalTree> ts(3);
        ts[0].nodes.push_back({-1, 0, -1, -1, 7.0, 10, 10});
        ts[1].degenerate = true;
        ts[1].nodes.push_back({-1, 0, -1, -1, 1000.0, 0, 0});
        ts[2].nodes.push_back({-1, 0, -1, -1, 5.0, 10, 10});
        return ts;
      }(),
      0).to_json());
  Matrix X(1, 1, 0.0);
  auto psi = f.predict_cate(X);
  CHECK(psi[0] == doctest::Approx(6.0));  // (7 + 5) / 2, degenerate tree ignored
  CHECK(f.n_degenerate() == 1);
}

TEST_CASE("single-leaf forest predicts its theta everywhere") {
  std::vector<CausalTree> ts(1);
  ts[0].nodes.push_back({-1, 0, -1, -1, 7.0, 8, 9});
  CausalForest f(ForestParams{}, 2, std::move(ts), 0);
  Matrix X(3, 2);
  X(1, 0) = -4;
  X(2, 1) = 9;
  for (double v : f.predict_cate(X)) CHECK(v == 7.0);
}

TEST_CASE("translation equivariance: shifting outcomes and mu_hat leaves psi unchanged") {
  SimplePanel pop(300, 21, 2.0, 5.0, 1.0);
  auto f1 = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu, cf_params(15, 3));

  SimplePanel shifted = pop;
  const double c = 123.5;
  for (auto& v : shifted.y) v += c;
  for (auto& v : shifted.nu.mu_hat) v += c;
  for (auto& v : shifted.nu.mu1_hat) v += c;
  for (auto& v : shifted.nu.mu0_hat) v += c;
  auto f2 = fit_causal_forest(shifted.X, shifted.y, shifted.d, shifted.clusters,
                              shifted.nu, cf_params(15, 3));
  auto p1 = f1.predict_cate(pop.X);
  auto p2 = f2.predict_cate(pop.X);
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-12));
}

TEST_CASE("treatment relabeling negates every CATE exactly") {
  SimplePanel pop(300, 33, 1.0, 6.0, 1.0);
  auto f1 = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu, cf_params(15, 3));

  SimplePanel flipped = pop;
  for (auto& v : flipped.d) v = static_cast<std::int8_t>(1 - v);
  for (auto& v : flipped.nu.p_hat) v = 1.0 - v;
  std::swap(flipped.nu.mu1_hat, flipped.nu.mu0_hat);
  auto f2 = fit_causal_forest(flipped.X, flipped.y, flipped.d, flipped.clusters,
                              flipped.nu, cf_params(15, 3));
  auto p1 = f1.predict_cate(pop.X);
  auto p2 = f2.predict_cate(pop.X);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == -p2[i]);
}

TEST_CASE("zero-effect DGP: mean CATE is within 3 Monte-Carlo SEs of zero") {
  SimplePanel pop(800, 55, 0.0, 0.0, 1.0);
  auto forest = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu,
                                  cf_params(60, 10));
  auto psi = forest.predict_cate(pop.X);
  double mean = 0, var = 0;
  for (double v : psi) mean += v;
  mean /= static_cast<double>(psi.size());
  for (double v : psi) var += (v - mean) * (v - mean);
  var /= static_cast<double>(psi.size() - 1);
  const double mc_se = std::sqrt(var / static_cast<double>(psi.size())) + 1e-3;
  CHECK(std::fabs(mean) < 3 * mc_se + 0.1);
}

TEST_CASE("out-of-bag predictions skip trees that saw the row's cluster") {
  SimplePanel pop(200, 77, 3.0, 3.0, 0.5);
  auto forest = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu,
                                  cf_params(30, 11));
  auto [psi, cover] = forest.predict_cate_oob(pop.X, pop.clusters);
  for (std::size_t i = 0; i < pop.X.rows; ++i) {
    double s = 0;
    int m = 0;
    for (const auto& t : forest.trees()) {
      if (t.degenerate) continue;
      if (std::binary_search(t.subsample_clusters.begin(), t.subsample_clusters.end(),
                             pop.clusters[i]))
        continue;
      s += t.leaf_for(pop.X.row(i)).theta;
      ++m;
    }
    CHECK(cover[i] == m);
    if (m > 0) CHECK(psi[i] == doctest::Approx(s / m));
  }
}

TEST_CASE("determinism across thread counts") {
  SimplePanel pop(300, 101, 1.0, 4.0, 1.0);
  ForestParams p1 = cf_params(16, 19);
  p1.n_threads = 1;
  ForestParams p4 = p1;
  p4.n_threads = 4;
  auto f1 = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu, p1);
  auto f4 = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu, p4);
  auto a = f1.predict_cate(pop.X);
  auto b = f4.predict_cate(pop.X);
  CHECK(a == b);
}

TEST_CASE("serialization round trip is prediction-exact and keeps the nuisance hash") {
  SimplePanel pop(200, 3, 2.0, 2.0, 0.5);
  auto f = fit_causal_forest(pop.X, pop.y, pop.d, pop.clusters, pop.nu, cf_params(10, 2));
  auto g = CausalForest::from_json(f.to_json());
  CHECK(g.nuisance_hash() == pop.nu.content_hash());
  CHECK(f.predict_cate(pop.X) == g.predict_cate(pop.X));
}

TEST_CASE("cate_histogram: counts, coverage, edge cases") {
  std::vector<double> all_equal(10, 2.5);
  auto h1 = cate_histogram(all_equal, 1.0);
  std::size_t occupied = 0, total = 0;
  for (auto c : h1.counts) {
    if (c > 0) ++occupied;
    total += c;
  }
  CHECK(occupied == 1);
  CHECK(total == 10);

  std::vector<double> spread = {-3.2, -1.0, 0.0, 0.4, 2.9, 7.7};
  auto h2 = cate_histogram(spread, 0.5);
  std::size_t sum = 0;
  for (auto c : h2.counts) sum += c;
  CHECK(sum == spread.size());
  CHECK(h2.edges.front() <= -3.2);
  CHECK(h2.edges.back() >= 7.7);

  CHECK_THROWS_AS(cate_histogram(spread, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cate_histogram({}, 1.0), std::invalid_argument);

  auto csv = histogram_csv(h2);
  CHECK(csv.rfind("bin_left,bin_right,count\n", 0) == 0);
}
