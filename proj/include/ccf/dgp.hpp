#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccf/panel.hpp"

namespace ccf {

enum class TauSpec { Constant, Threshold, Signed, Linear };
enum class PropensitySpec { Uniform, Logistic, UnknownPenalized };

TauSpec tau_spec_from_string(const std::string& s);
PropensitySpec propensity_spec_from_string(const std::string& s);

struct DgpConfig {
  int n_customers = 500;
  int n_periods = 5;
  int period_length_days = 10;
  TauSpec tau_spec = TauSpec::Constant;
  double tau_param = 10.0;       // constant c / amplitude / linear slope
  PropensitySpec propensity_spec = PropensitySpec::Logistic;
  double propensity_param = 1.2;  // uniform q, or logistic slope on x1
  double noise_sd = 20.0;
  double missing_rate = 0.2;
  std::uint64_t seed = 1;
};

/// Per-observation ground truth, aligned with the emitted panel rows.
struct GroundTruth {
  std::vector<double> tau;
  std::vector<double> propensity;
  std::vector<double> baseline;
};

struct SimulatedData {
  PanelDataset panel;   // includes x1 as an observed covariate
  GroundTruth truth;
  // raw tables matching the CSV ingestion contract
  std::vector<CustomerRecord> customers;
  std::vector<Transaction> transactions;
  std::vector<CouponAssignment> coupons;
  EncodingSchema schema;
};

/// Synthetic coupon campaign with known tau, propensity and baseline.
/// Deterministic given config.seed; throws when the implied propensities
/// violate the (0.05, 0.95) overlap band.
SimulatedData simulate(const DgpConfig& config);

double true_ate(const GroundTruth& truth);

/// customers.csv, transactions.csv, coupons.csv, truth.csv
void write_dgp_csvs(const SimulatedData& data, const std::string& dir);

}  // namespace ccf
