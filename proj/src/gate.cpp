#include "ccf/gate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "ccf/csv.hpp"

namespace ccf {

void GroupScheme::validate() const {
  std::vector<std::size_t> sizes(labels.size(), 0);
  for (int g : assignment) {
    if (g < 0 || static_cast<std::size_t>(g) >= labels.size())
      throw std::logic_error("group scheme '" + name + "': assignment out of range");
    ++sizes[static_cast<std::size_t>(g)];
  }
  for (std::size_t g = 0; g < sizes.size(); ++g)
    if (sizes[g] == 0)
      throw std::logic_error("group scheme '" + name + "': empty group " + labels[g]);
}

GroupScheme quartile_groups(std::span<const double> values, const std::string& name) {
  if (values.size() < 4) throw std::invalid_argument("quartile_groups: need n >= 4");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw std::invalid_argument("quartile_groups: degenerate grouping");

  const std::size_t n = sorted.size();
  std::vector<double> breaks;
  for (std::size_t q = 1; q <= 3; ++q)
    breaks.push_back(sorted[n * q / 4 - 1]);
  // large tie blocks can make breakpoints coincide; collapse them so no
  // group comes out empty
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (!breaks.empty() && breaks.back() == sorted.back()) breaks.pop_back();

  GroupScheme s;
  s.name = name;
  for (std::size_t g = 0; g <= breaks.size(); ++g)
    s.labels.push_back("Q" + std::to_string(g + 1));
  s.assignment.reserve(values.size());
  for (double v : values) {
    int g = 0;
    for (double b : breaks)
      if (v > b) ++g;  // ties go to the lower group
    s.assignment.push_back(g);
  }
  s.validate();
  return s;
}

GroupScheme onehot_groups(const PanelDataset& ds, const std::string& prefix) {
  std::vector<std::size_t> cols;
  GroupScheme s;
  s.name = prefix;
  const std::string pat = prefix + ":";
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
    if (ds.feature_names[j].rfind(pat, 0) == 0) {
      cols.push_back(j);
      s.labels.push_back(ds.feature_names[j].substr(pat.size()));
    }
  }
  if (cols.empty())
    throw std::invalid_argument("onehot_groups: no columns with prefix " + prefix);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    int g = -1;
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (ds.X(i, cols[c]) != 0.0) g = static_cast<int>(c);
    if (g < 0)
      throw std::invalid_argument("onehot_groups: row outside one-hot block " + prefix);
    s.assignment.push_back(g);
  }
  // drop levels never observed so the scheme invariant holds
  std::vector<std::size_t> count(s.labels.size(), 0);
  for (int g : s.assignment) ++count[static_cast<std::size_t>(g)];
  std::vector<int> remap(s.labels.size(), -1);
  std::vector<std::string> labels;
  for (std::size_t g = 0; g < s.labels.size(); ++g) {
    if (count[g] > 0) {
      remap[g] = static_cast<int>(labels.size());
      labels.push_back(s.labels[g]);
    }
  }
  for (int& g : s.assignment) g = remap[static_cast<std::size_t>(g)];
  s.labels = std::move(labels);
  s.validate();
  return s;
}

GroupScheme cross_schemes(const GroupScheme& a, const GroupScheme& b) {
  if (a.assignment.size() != b.assignment.size())
    throw std::invalid_argument("cross_schemes: size mismatch");
  GroupScheme s;
  s.name = a.name + "x" + b.name;
  std::map<std::pair<int, int>, int> index;
  for (std::size_t i = 0; i < a.assignment.size(); ++i) {
    auto key = std::make_pair(a.assignment[i], b.assignment[i]);
    auto [it, fresh] = index.emplace(key, static_cast<int>(s.labels.size()));
    if (fresh)
      s.labels.push_back(a.labels[static_cast<std::size_t>(key.first)] + "/" +
                         b.labels[static_cast<std::size_t>(key.second)]);
    s.assignment.push_back(it->second);
  }
  s.validate();
  return s;
}

GateResult estimate_gates(const DoublyRobustScores& scores, const GroupScheme& scheme) {
  if (scores.gamma.size() != scheme.assignment.size())
    throw std::invalid_argument("estimate_gates: size mismatch");
  scheme.validate();
  const std::size_t G = scheme.n_groups();

  std::vector<double> sum(G, 0.0);
  std::vector<std::size_t> n(G, 0);
  std::vector<std::set<int>> group_clusters(G);
  for (std::size_t i = 0; i < scores.gamma.size(); ++i) {
    auto g = static_cast<std::size_t>(scheme.assignment[i]);
    sum[g] += scores.gamma[i];
    ++n[g];
    group_clusters[g].insert(scores.clusters[i]);
  }
  for (std::size_t g = 0; g < G; ++g)
    if (group_clusters[g].size() < 2)
      throw std::invalid_argument("estimate_gates: group '" + scheme.labels[g] +
                                  "' has a single cluster");

  GateResult r;
  r.coef.resize(G);
  for (std::size_t g = 0; g < G; ++g) r.coef[g] = sum[g] / static_cast<double>(n[g]);

  // cluster sums of residuals, per group (orthogonal design sandwich)
  std::vector<std::map<int, double>> cs(G);
  for (std::size_t i = 0; i < scores.gamma.size(); ++i) {
    auto g = static_cast<std::size_t>(scheme.assignment[i]);
    cs[g][scores.clusters[i]] += scores.gamma[i] - r.coef[g];
  }
  for (std::size_t g = 0; g < G; ++g) {
    double v = 0;
    for (const auto& [c, s] : cs[g]) v += s * s;
    v /= static_cast<double>(n[g]) * static_cast<double>(n[g]);
    r.se.push_back(std::sqrt(v));
    r.ci_lo.push_back(r.coef[g] - 1.96 * r.se[g]);
    r.ci_hi.push_back(r.coef[g] + 1.96 * r.se[g]);
  }
  return r;
}

std::string gate_csv(const GateResult& result, const GroupScheme& scheme) {
  csv::Table t;
  t.header = {"group_label", "coef", "se", "ci_lo", "ci_hi"};
  for (std::size_t g = 0; g < scheme.n_groups(); ++g)
    t.rows.push_back({scheme.labels[g], csv::fmt_g6(result.coef[g]),
                      csv::fmt_g6(result.se[g]), csv::fmt_g6(result.ci_lo[g]),
                      csv::fmt_g6(result.ci_hi[g])});
  return csv::format(t);
}

}  // namespace ccf
