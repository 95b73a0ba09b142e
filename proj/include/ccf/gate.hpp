#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccf/dr_scores.hpp"
#include "ccf/panel.hpp"

namespace ccf {

struct GroupScheme {
  std::string name;
  std::vector<int> assignment;      // per-observation group index 0..G-1
  std::vector<std::string> labels;  // size G

  std::size_t n_groups() const { return labels.size(); }
  void validate() const;  // every observation assigned, every group non-empty
};

/// Quartile groups of a continuous variable; ties go to the lower group,
/// so zero-spenders populate the bottom group. Throws on a constant vector.
GroupScheme quartile_groups(std::span<const double> values,
                            const std::string& name = "quartile");

/// One group per level of a one-hot block ("<prefix>:<level>" columns).
GroupScheme onehot_groups(const PanelDataset& ds, const std::string& prefix);

/// Cross-product of two schemes (for multi-variable segments).
GroupScheme cross_schemes(const GroupScheme& a, const GroupScheme& b);

struct GateResult {
  std::vector<double> coef;
  std::vector<double> se;
  std::vector<double> ci_lo;  // coef - 1.96 se
  std::vector<double> ci_hi;
};

/// Intercept-free regression of scores on group indicators; since the
/// design is orthogonal each coefficient is its group's score mean, with
/// cluster-robust sandwich standard errors.
GateResult estimate_gates(const DoublyRobustScores& scores, const GroupScheme& scheme);

std::string gate_csv(const GateResult& result, const GroupScheme& scheme);

}  // namespace ccf
