#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ccf/matrix.hpp"

namespace ccf {

/// Validity window of one coupon assignment, inclusive day indices.
struct CouponValidity {
  std::string category;
  int start_day = 0;
  int end_day = 0;
};

/// Maximal interval of the campaign timeline on which the active coupon
/// set is constant. Gaps between campaigns appear with an empty set.
struct Period {
  int start_day = 0;
  int end_day = 0;  // inclusive
  std::set<std::string> active;

  int length_days() const { return end_day - start_day + 1; }
};

/// Coarsest constant-active-set partition of the covered timeline.
/// Throws on empty input.
std::vector<Period> partition_campaign_periods(const std::vector<CouponValidity>& validities);

struct Transaction {
  std::string customer_id;
  int day = 0;
  double amount = 0.0;
};

struct CouponAssignment {
  std::string customer_id;
  std::string category;
  int start_day = 0;
  int end_day = 0;
  std::optional<int> redeemed_day;
};

struct ColumnSpec {
  std::string name;
  bool categorical = true;
  std::vector<std::string> levels;  // closed set, "unknown" is an ordinary level
};

struct EncodingSchema {
  std::vector<ColumnSpec> columns;
};

/// Schema used by the synthetic generator and the bundled CSV contract:
/// age_group, family_size, marital_status, dwelling, income_group.
EncodingSchema default_customer_schema();

struct CustomerRecord {
  std::string id;
  std::vector<std::string> attrs;  // aligned with schema columns
};

/// One-hot encode categoricals (schema order, then level order) and pass
/// continuous columns through. Throws on a level outside the schema.
std::pair<Matrix, std::vector<std::string>> encode_covariates(
    const std::vector<std::vector<std::string>>& rows, const EncodingSchema& schema);

/// Pooled customer x period panel. Immutable after construction.
struct PanelDataset {
  Matrix X;                                // n x k covariates
  std::vector<double> outcome;             // per-day expenditure
  std::vector<std::int8_t> treatment;      // 0/1
  std::vector<int> cluster;                // customer index per row
  std::vector<int> period;                 // panel period index per row (1-based)
  std::vector<std::string> cluster_ids;    // customer_id by cluster index
  std::vector<std::string> feature_names;
  std::vector<std::string> category_registry;
  std::vector<std::string> diagnostics;    // common-support and other warnings
  int n_periods = 0;

  std::size_t n_rows() const { return outcome.size(); }
  std::size_t n_features() const { return X.cols; }
  std::size_t n_customers() const;
  int feature_index(const std::string& name) const;  // -1 if absent
  void validate() const;  // invariant check, throws on violation
};

struct PanelBuildOptions {
  /// Category whose receipt defines the treatment; "any" pools all.
  std::string target_category = "any";
};

/// Pool transactions into one observation per (customer, period t >= 2);
/// period 1 is consumed by the lagged covariates.
PanelDataset build_panel(const std::vector<Transaction>& transactions,
                         const std::vector<CouponAssignment>& assignments,
                         const std::vector<CustomerRecord>& customers,
                         const EncodingSchema& customer_schema,
                         const std::vector<Period>& periods,
                         const PanelBuildOptions& options = {});

struct DescribeRow {
  std::string variable;
  double mean_all = 0.0;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  double diff = 0.0;
  double p_value = 1.0;
  bool defined = true;  // false when a treatment arm is empty
};

/// Table-1 style summary: outcome plus every covariate, with Welch
/// two-sample t-test p-values for the treated/control difference.
std::vector<DescribeRow> describe(const PanelDataset& ds, bool by_treatment = true);

std::string describe_csv(const std::vector<DescribeRow>& rows);

/// Welch unequal-variance two-sample t-test p-value.
double welch_p_value(std::span<const double> a, std::span<const double> b);

/// Subset the panel; customer/period bookkeeping is recomputed.
/// Throws if the predicate selects zero rows.
PanelDataset filter_rows(const PanelDataset& ds,
                         const std::function<bool(std::span<const double>)>& keep);

/// Predicate dropping rows where any "<col>:unknown" indicator is set.
std::function<bool(std::span<const double>)> known_only_predicate(const PanelDataset& ds);

}  // namespace ccf
