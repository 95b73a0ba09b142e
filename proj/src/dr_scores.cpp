#include "ccf/dr_scores.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "ccf/csv.hpp"

namespace ccf {

DoublyRobustScores aipw_scores(std::span<const double> y,
                               std::span<const std::int8_t> treatment,
                               std::span<const int> clusters,
                               const NuisanceEstimates& nuisances,
                               std::string estimand_label) {
  const std::size_t n = y.size();
  if (treatment.size() != n || clusters.size() != n)
    throw std::invalid_argument("aipw_scores: length mismatch");
  nuisances.validate(n);

  DoublyRobustScores s;
  s.estimand_label = std::move(estimand_label);
  s.gamma.resize(n);
  s.clusters.assign(clusters.begin(), clusters.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double p = nuisances.p_hat[i];
    const double m1 = nuisances.mu1_hat[i];
    const double m0 = nuisances.mu0_hat[i];
    const double d = static_cast<double>(treatment[i]);
    s.gamma[i] = m1 - m0 + d * (y[i] - m1) / p - (1.0 - d) * (y[i] - m0) / (1.0 - p);
    if (!std::isfinite(s.gamma[i]))
      throw std::runtime_error("aipw_scores: non-finite score at row " +
                               std::to_string(i));
  }
  return s;
}

AteResult estimate_ate(const DoublyRobustScores& scores) {
  const std::size_t n = scores.gamma.size();
  if (n == 0) throw std::invalid_argument("estimate_ate: empty scores");

  double theta = 0;
  for (double g : scores.gamma) theta += g;
  theta /= static_cast<double>(n);

  std::map<int, double> cluster_sums;
  for (std::size_t i = 0; i < n; ++i)
    cluster_sums[scores.clusters[i]] += scores.gamma[i] - theta;
  if (cluster_sums.size() < 2) throw std::invalid_argument("cannot cluster");

  double var = 0;
  for (const auto& [c, s] : cluster_sums) var += s * s;
  var /= static_cast<double>(n) * static_cast<double>(n);

  AteResult r;
  r.theta = theta;
  r.std_error = std::sqrt(var);
  r.n = n;
  r.n_clusters = cluster_sums.size();
  r.significance_code = significance_stars(theta, r.std_error);
  return r;
}

double robinson_ate(std::span<const double> y, std::span<const std::int8_t> treatment,
                    const NuisanceEstimates& nuisances) {
  const std::size_t n = y.size();
  nuisances.validate(n);
  std::vector<double> ry(n), rd(n);
  for (std::size_t i = 0; i < n; ++i) {
    ry[i] = y[i] - nuisances.mu_hat[i];
    rd[i] = static_cast<double>(treatment[i]) - nuisances.p_hat[i];
  }
  return robinson_theta(ry, rd);
}

std::string significance_stars(double coef, double se) {
  if (!(se > 0)) return coef == 0.0 ? "" : "***";
  boost::math::normal norm;
  const double p = 2.0 * boost::math::cdf(boost::math::complement(
                             norm, std::fabs(coef / se)));
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

std::string significance_legend() {
  return ". p<0.1, * p<0.05, ** p<0.01, *** p<0.001";
}

std::string ate_table_csv(const std::vector<std::pair<std::string, AteResult>>& rows) {
  if (rows.empty()) throw std::invalid_argument("ate_table: no rows");
  csv::Table t;
  t.header = {"estimand", "coef", "se", "stars"};
  for (const auto& [label, r] : rows)
    t.rows.push_back({label, csv::fmt_g6(r.theta), csv::fmt_g6(r.std_error),
                      r.significance_code});
  return csv::format(t);
}

std::string ate_table_text(const std::vector<std::pair<std::string, AteResult>>& rows) {
  if (rows.empty()) throw std::invalid_argument("ate_table: no rows");
  std::size_t w = 8;
  for (const auto& [label, r] : rows) w = std::max(w, label.size());
  std::ostringstream out;
  for (const auto& [label, r] : rows) {
    out << label;
    out.write("                                                                ",
              static_cast<std::streamsize>(w - label.size() + 2));
    out << csv::fmt_g6(r.theta) << "  (" << csv::fmt_g6(r.std_error) << ")  "
        << r.significance_code << '\n';
  }
  out << "Significance levels: " << significance_legend() << '\n';
  return out.str();
}

std::string scores_csv(const DoublyRobustScores& scores,
                       const std::vector<std::string>& cluster_ids,
                       std::span<const int> periods) {
  csv::Table t;
  t.header = {"row_id", "customer_id", "period_id", "gamma"};
  for (std::size_t i = 0; i < scores.gamma.size(); ++i) {
    t.rows.push_back({std::to_string(i),
                      cluster_ids[static_cast<std::size_t>(scores.clusters[i])],
                      std::to_string(periods[i]), csv::fmt_g6(scores.gamma[i])});
  }
  return csv::format(t);
}

}  // namespace ccf
