#include "ccf/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ccf/csv.hpp"
#include "ccf/rng.hpp"

namespace ccf {

TauSpec tau_spec_from_string(const std::string& s) {
  if (s == "constant") return TauSpec::Constant;
  if (s == "threshold") return TauSpec::Threshold;
  if (s == "signed") return TauSpec::Signed;
  if (s == "linear") return TauSpec::Linear;
  throw std::invalid_argument("unknown tau spec: " + s);
}

PropensitySpec propensity_spec_from_string(const std::string& s) {
  if (s == "uniform") return PropensitySpec::Uniform;
  if (s == "logistic") return PropensitySpec::Logistic;
  if (s == "unknown-penalized") return PropensitySpec::UnknownPenalized;
  throw std::invalid_argument("unknown propensity spec: " + s);
}

namespace {

double tau_of(const DgpConfig& c, double x1) {
  switch (c.tau_spec) {
    case TauSpec::Constant: return c.tau_param;
    case TauSpec::Threshold: return x1 > 0 ? c.tau_param : 0.0;
    case TauSpec::Signed: return x1 > 0 ? c.tau_param : (x1 < 0 ? -c.tau_param : 0.0);
    case TauSpec::Linear: return c.tau_param * x1;
  }
  return 0.0;
}

double propensity_of(const DgpConfig& c, double x1, bool any_unknown) {
  switch (c.propensity_spec) {
    case PropensitySpec::Uniform:
      if (!(c.propensity_param > 0.05 && c.propensity_param < 0.95))
        throw std::invalid_argument("dgp: uniform propensity violates overlap");
      return c.propensity_param;
    case PropensitySpec::Logistic: {
      const double z = c.propensity_param * x1 - 0.3;
      return std::clamp(1.0 / (1.0 + std::exp(-z)), 0.05, 0.95);
    }
    case PropensitySpec::UnknownPenalized:
      return std::clamp(0.40 - 0.25 * (any_unknown ? 1.0 : 0.0) + 0.05 * x1, 0.05, 0.95);
  }
  return 0.5;
}

}  // namespace

SimulatedData simulate(const DgpConfig& config) {
  if (config.n_customers < 2 || config.n_periods < 2)
    throw std::invalid_argument("dgp: need at least 2 customers and 2 periods");
  if (config.noise_sd < 0 || config.missing_rate < 0 || config.missing_rate >= 1)
    throw std::invalid_argument("dgp: invalid noise or missing rate");

  SimulatedData out;
  out.schema = default_customer_schema();
  auto rng = make_rng(config.seed, 0xd69);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int C = config.n_customers;
  const int T = config.n_periods;
  const int L = config.period_length_days;

  std::vector<double> x1(static_cast<std::size_t>(C));
  std::vector<bool> any_unknown(static_cast<std::size_t>(C), false);
  std::vector<double> baseline(static_cast<std::size_t>(C));
  std::vector<std::vector<std::string>> attrs(static_cast<std::size_t>(C));

  for (int i = 0; i < C; ++i) {
    auto ui = static_cast<std::size_t>(i);
    x1[ui] = stdnorm(rng);
    double income_shift = 0.0;
    for (const auto& col : out.schema.columns) {
      bool unknown = unif(rng) < config.missing_rate;
      std::string level;
      if (unknown) {
        level = "unknown";
        any_unknown[ui] = true;
      } else {
        auto real_levels = col.levels.size() - 1;  // schema lists "unknown" last
        std::uniform_int_distribution<std::size_t> pick(0, real_levels - 1);
        level = col.levels[pick(rng)];
      }
      if (col.name == "income_group" && level != "unknown")
        income_shift = 2.0 * static_cast<double>(level[0] - '0');
      attrs[ui].push_back(level);
    }
    // unknown socio-economics correlate with lower spend, so naive
    // comparisons are confounded
    baseline[ui] = 100.0 + 30.0 * x1[ui] - 40.0 * (any_unknown[ui] ? 1.0 : 0.0) +
                   income_shift;
    out.customers.push_back({"c" + std::to_string(i), attrs[ui]});
  }

  // realized per-day outcomes and treatments for all periods 1..T
  std::vector<double> y(static_cast<std::size_t>(C * T));
  std::vector<std::int8_t> d(static_cast<std::size_t>(C * T));
  std::vector<double> p(static_cast<std::size_t>(C));
  for (int i = 0; i < C; ++i)
    p[static_cast<std::size_t>(i)] =
        propensity_of(config, x1[static_cast<std::size_t>(i)],
                      any_unknown[static_cast<std::size_t>(i)]);
  for (int i = 0; i < C; ++i) {
    for (int t = 0; t < T; ++t) {
      auto k = static_cast<std::size_t>(i * T + t);
      d[k] = static_cast<std::int8_t>(unif(rng) < p[static_cast<std::size_t>(i)]);
      const double noise = config.noise_sd > 0 ? config.noise_sd * stdnorm(rng) : 0.0;
      double v = baseline[static_cast<std::size_t>(i)] + 2.0 * t +
                 (d[k] ? tau_of(config, x1[static_cast<std::size_t>(i)]) : 0.0) + noise;
      y[k] = std::max(0.0, v);
    }
  }

  // raw tables for the CSV contract
  for (int i = 0; i < C; ++i) {
    for (int t = 0; t < T; ++t) {
      auto k = static_cast<std::size_t>(i * T + t);
      const int start_day = t * L + 1;
      const int end_day = (t + 1) * L;
      out.transactions.push_back(
          {"c" + std::to_string(i), start_day, y[k] * static_cast<double>(L)});
      if (d[k]) {
        CouponAssignment a;
        a.customer_id = "c" + std::to_string(i);
        // alternate the campaign category so adjacent periods have
        // different active sets and the period partition is recoverable
        // from the coupon windows alone
        a.category = (t % 2 == 0) ? "grocery" : "household";
        a.start_day = start_day;
        a.end_day = end_day;
        if (unif(rng) < 0.3) a.redeemed_day = start_day + 1;
        out.coupons.push_back(a);
      }
    }
  }

  // in-memory panel with x1 observed; period 1 feeds the lags
  auto [socio, socio_names] = encode_covariates(attrs, out.schema);
  PanelDataset& ds = out.panel;
  ds.feature_names.push_back("x1");
  for (const auto& nm : socio_names) ds.feature_names.push_back(nm);
  for (int t = 3; t <= T; ++t) ds.feature_names.push_back("period:" + std::to_string(t));
  ds.feature_names.push_back("lag_outcome");
  ds.feature_names.push_back("lag_any_coupon");
  ds.category_registry = {"grocery", "household"};
  ds.n_periods = T;

  const auto n = static_cast<std::size_t>(C) * static_cast<std::size_t>(T - 1);
  ds.X = Matrix(n, ds.feature_names.size());
  ds.outcome.resize(n);
  ds.treatment.resize(n);
  ds.cluster.resize(n);
  ds.period.resize(n);
  for (int i = 0; i < C; ++i) ds.cluster_ids.push_back("c" + std::to_string(i));

  std::size_t row = 0;
  for (int i = 0; i < C; ++i) {
    auto ui = static_cast<std::size_t>(i);
    for (int t = 2; t <= T; ++t, ++row) {
      auto k = static_cast<std::size_t>(i * T + (t - 1));
      auto klag = static_cast<std::size_t>(i * T + (t - 2));
      ds.outcome[row] = y[k];
      ds.treatment[row] = d[k];
      ds.cluster[row] = i;
      ds.period[row] = t;
      std::size_t j = 0;
      ds.X(row, j++) = x1[ui];
      for (std::size_t c = 0; c < socio.cols; ++c) ds.X(row, j++) = socio(ui, c);
      for (int pt = 3; pt <= T; ++pt) ds.X(row, j++) = (pt == t) ? 1.0 : 0.0;
      ds.X(row, j++) = y[klag];
      ds.X(row, j++) = d[klag] ? 1.0 : 0.0;

      out.truth.tau.push_back(tau_of(config, x1[ui]));
      out.truth.propensity.push_back(p[ui]);
      out.truth.baseline.push_back(baseline[ui] + 2.0 * (t - 1));
    }
  }
  ds.validate();
  return out;
}

double true_ate(const GroundTruth& truth) {
  if (truth.tau.empty()) throw std::invalid_argument("true_ate: empty ground truth");
  double s = 0;
  for (double v : truth.tau) s += v;
  return s / static_cast<double>(truth.tau.size());
}

void write_dgp_csvs(const SimulatedData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  csv::Table customers;
  customers.header = {"customer_id"};
  for (const auto& col : data.schema.columns) customers.header.push_back(col.name);
  for (const auto& c : data.customers) {
    std::vector<std::string> row = {c.id};
    row.insert(row.end(), c.attrs.begin(), c.attrs.end());
    customers.rows.push_back(std::move(row));
  }
  csv::write_file(dir + "/customers.csv", customers);

  csv::Table tx;
  tx.header = {"customer_id", "day", "amount"};
  for (const auto& t : data.transactions)
    tx.rows.push_back({t.customer_id, std::to_string(t.day), csv::fmt_g6(t.amount)});
  csv::write_file(dir + "/transactions.csv", tx);

  csv::Table coupons;
  coupons.header = {"customer_id", "category", "start_day", "end_day", "redeemed_day"};
  for (const auto& a : data.coupons)
    coupons.rows.push_back({a.customer_id, a.category, std::to_string(a.start_day),
                            std::to_string(a.end_day),
                            a.redeemed_day ? std::to_string(*a.redeemed_day) : ""});
  csv::write_file(dir + "/coupons.csv", coupons);

  csv::Table truth;
  truth.header = {"row_id", "tau", "propensity", "baseline"};
  for (std::size_t i = 0; i < data.truth.tau.size(); ++i)
    truth.rows.push_back({std::to_string(i), csv::fmt_g6(data.truth.tau[i]),
                          csv::fmt_g6(data.truth.propensity[i]),
                          csv::fmt_g6(data.truth.baseline[i])});
  csv::write_file(dir + "/truth.csv", truth);
}

}  // namespace ccf
