#pragma once

#include <string>
#include <vector>

#include "ccf/csv.hpp"
#include "ccf/panel.hpp"

namespace ccf {

/// Parsers for the three input CSVs (customers, transactions, coupons).
/// Header names are part of the contract; unknown columns are rejected
/// by name in the error message.
std::vector<CustomerRecord> load_customers(const csv::Table& table,
                                           const EncodingSchema& schema);
std::vector<Transaction> load_transactions(const csv::Table& table);
std::vector<CouponAssignment> load_coupons(const csv::Table& table);

}  // namespace ccf
