#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccf/causal_forest.hpp"

namespace ccf {

/// Per-observation AIPW scores; their mean estimates the ATE.
struct DoublyRobustScores {
  std::vector<double> gamma;
  std::vector<int> clusters;
  std::string estimand_label;
};

struct AteResult {
  double theta = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::size_t n_clusters = 0;
  std::string significance_code;
};

/// Gamma_i = mu1 - mu0 + D (Y - mu1) / p - (1 - D)(Y - mu0) / (1 - p).
/// Nuisances must be cross-fitted and the propensity clamped upstream.
DoublyRobustScores aipw_scores(std::span<const double> y,
                               std::span<const std::int8_t> treatment,
                               std::span<const int> clusters,
                               const NuisanceEstimates& nuisances,
                               std::string estimand_label = "ate");

/// Mean score with cluster-robust standard error:
///   var = (1/N^2) sum_c (sum_{i in c} (Gamma_i - theta))^2.
AteResult estimate_ate(const DoublyRobustScores& scores);

/// Robinson partialling-out cross-check on the same nuisances.
double robinson_ate(std::span<const double> y, std::span<const std::int8_t> treatment,
                    const NuisanceEstimates& nuisances);

/// Stars per the usual legend: . p<0.1, * p<0.05, ** p<0.01, *** p<0.001
/// (normal approximation).
std::string significance_stars(double coef, double se);

std::string significance_legend();

std::string ate_table_csv(const std::vector<std::pair<std::string, AteResult>>& rows);
std::string ate_table_text(const std::vector<std::pair<std::string, AteResult>>& rows);

std::string scores_csv(const DoublyRobustScores& scores,
                       const std::vector<std::string>& cluster_ids,
                       std::span<const int> periods);

}  // namespace ccf
