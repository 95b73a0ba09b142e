#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "ccf/dgp.hpp"
#include "ccf/io.hpp"

using namespace ccf;

namespace {

DgpConfig small_config() {
  DgpConfig c;
  c.n_customers = 80;
  c.n_periods = 4;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("spec parsing") {
  CHECK(tau_spec_from_string("constant") == TauSpec::Constant);
  CHECK(tau_spec_from_string("threshold") == TauSpec::Threshold);
  CHECK(tau_spec_from_string("signed") == TauSpec::Signed);
  CHECK(tau_spec_from_string("linear") == TauSpec::Linear);
  CHECK_THROWS_AS(tau_spec_from_string("bogus"), std::invalid_argument);
  CHECK(propensity_spec_from_string("uniform") == PropensitySpec::Uniform);
  CHECK(propensity_spec_from_string("logistic") == PropensitySpec::Logistic);
  CHECK(propensity_spec_from_string("unknown-penalized") ==
        PropensitySpec::UnknownPenalized);
  CHECK_THROWS_AS(propensity_spec_from_string(""), std::invalid_argument);
}

TEST_CASE("same seed reproduces the simulation exactly") {
  auto a = simulate(small_config());
  auto b = simulate(small_config());
  CHECK(a.panel.X.data == b.panel.X.data);
  CHECK(a.panel.outcome == b.panel.outcome);
  CHECK(a.panel.treatment == b.panel.treatment);
  CHECK(a.truth.tau == b.truth.tau);
  CHECK(a.truth.propensity == b.truth.propensity);

  DgpConfig other = small_config();
  other.seed = 8;
  auto c = simulate(other);
  CHECK(a.panel.outcome != c.panel.outcome);
}

TEST_CASE("panel shape: one row per customer and post-initial period") {
  auto cfg = small_config();
  auto s = simulate(cfg);
  const auto n = static_cast<std::size_t>(cfg.n_customers * (cfg.n_periods - 1));
  CHECK(s.panel.n_rows() == n);
  CHECK(s.truth.tau.size() == n);
  CHECK(s.panel.n_customers() == static_cast<std::size_t>(cfg.n_customers));
  CHECK(s.panel.n_periods == cfg.n_periods);
  CHECK(s.panel.feature_index("x1") == 0);
  CHECK(s.panel.feature_index("lag_outcome") >= 0);
  CHECK(s.panel.feature_index("lag_any_coupon") >= 0);
  s.panel.validate();
}

TEST_CASE("every propensity respects the overlap band") {
  for (auto spec : {PropensitySpec::Logistic, PropensitySpec::UnknownPenalized}) {
    DgpConfig cfg = small_config();
    cfg.propensity_spec = spec;
    auto s = simulate(cfg);
    for (double p : s.truth.propensity) {
      CHECK(p >= 0.05);
      CHECK(p <= 0.95);
    }
  }
  DgpConfig bad = small_config();
  bad.propensity_spec = PropensitySpec::Uniform;
  bad.propensity_param = 0.99;
  CHECK_THROWS_AS(simulate(bad), std::invalid_argument);
}

TEST_CASE("true_ate of a constant effect is the constant") {
  DgpConfig cfg = small_config();
  cfg.tau_spec = TauSpec::Constant;
  cfg.tau_param = 7.0;
  auto s = simulate(cfg);
  CHECK(true_ate(s.truth) == doctest::Approx(7.0));
  CHECK_THROWS_AS(true_ate(GroundTruth{}), std::invalid_argument);
}

TEST_CASE("per-row tau matches a scan of the observed x1 column") {
  for (auto [spec, param] : std::vector<std::pair<TauSpec, double>>{
           {TauSpec::Threshold, 5.0}, {TauSpec::Signed, 10.0}, {TauSpec::Linear, 2.0}}) {
    DgpConfig cfg = small_config();
    cfg.tau_spec = spec;
    cfg.tau_param = param;
    auto s = simulate(cfg);
    long double sum = 0;
    for (std::size_t i = 0; i < s.panel.n_rows(); ++i) {
      const double x1 = s.panel.X(i, 0);
      double expect = 0;
      switch (spec) {
        case TauSpec::Threshold: expect = x1 > 0 ? param : 0.0; break;
        case TauSpec::Signed: expect = x1 > 0 ? param : (x1 < 0 ? -param : 0.0); break;
        case TauSpec::Linear: expect = param * x1; break;
        default: break;
      }
      CHECK(s.truth.tau[i] == doctest::Approx(expect));
      sum += expect;
    }
    CHECK(true_ate(s.truth) ==
          doctest::Approx(static_cast<double>(sum / s.panel.n_rows())));
  }
}

TEST_CASE("noiseless outcomes reproduce baseline plus treatment effect") {
  DgpConfig cfg = small_config();
  cfg.noise_sd = 0.0;
  cfg.tau_spec = TauSpec::Signed;
  cfg.tau_param = 10.0;
  auto s = simulate(cfg);
  for (std::size_t i = 0; i < s.panel.n_rows(); ++i) {
    const double v =
        s.truth.baseline[i] + (s.panel.treatment[i] ? s.truth.tau[i] : 0.0);
    CHECK(s.panel.outcome[i] == doctest::Approx(std::max(0.0, v)));
  }
}

TEST_CASE("missing_rate controls the share of unknown socio-economics") {
  DgpConfig cfg = small_config();
  cfg.n_customers = 2000;
  cfg.missing_rate = 0.25;
  auto s = simulate(cfg);
  std::size_t unknown_cells = 0, cells = 0;
  for (const auto& c : s.customers)
    for (const auto& a : c.attrs) {
      ++cells;
      if (a == "unknown") ++unknown_cells;
    }
  const double share = static_cast<double>(unknown_cells) / static_cast<double>(cells);
  CHECK(share == doctest::Approx(0.25).epsilon(0.1));

  DgpConfig none = small_config();
  none.missing_rate = 0.0;
  auto s0 = simulate(none);
  for (const auto& c : s0.customers)
    for (const auto& a : c.attrs) CHECK(a != "unknown");
}

TEST_CASE("CSV round trip rebuilds the same outcomes and treatments") {
  auto cfg = small_config();
  auto s = simulate(cfg);
  const std::string dir = "dgp_roundtrip_tmp";
  write_dgp_csvs(s, dir);

  auto customers = load_customers(csv::read_file(dir + "/customers.csv"), s.schema);
  auto transactions = load_transactions(csv::read_file(dir + "/transactions.csv"));
  auto coupons = load_coupons(csv::read_file(dir + "/coupons.csv"));
  std::filesystem::remove_all(dir);

  CHECK(customers.size() == s.customers.size());
  CHECK(transactions.size() == s.transactions.size());
  CHECK(coupons.size() == s.coupons.size());

  std::vector<CouponValidity> validities;
  for (const auto& c : coupons) validities.push_back({c.category, c.start_day, c.end_day});
  auto periods = partition_campaign_periods(validities);
  auto panel = build_panel(transactions, coupons, customers, s.schema, periods);

  REQUIRE(panel.n_rows() == s.panel.n_rows());
  // align by (customer_id, period) and compare: amounts pass through
  // %.6g once, so outcomes agree to 6 significant digits
  std::map<std::pair<std::string, int>, std::size_t> where;
  for (std::size_t i = 0; i < panel.n_rows(); ++i)
    where[{panel.cluster_ids[static_cast<std::size_t>(panel.cluster[i])],
           panel.period[i]}] = i;
  for (std::size_t i = 0; i < s.panel.n_rows(); ++i) {
    auto key = std::make_pair(
        s.panel.cluster_ids[static_cast<std::size_t>(s.panel.cluster[i])],
        s.panel.period[i]);
    REQUIRE(where.count(key) == 1);
    const std::size_t j = where[key];
    CHECK(panel.treatment[j] == s.panel.treatment[i]);
    CHECK(panel.outcome[j] ==
          doctest::Approx(s.panel.outcome[i]).epsilon(1e-5));
  }
}
