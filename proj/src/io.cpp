#include "ccf/io.hpp"

#include <stdexcept>

namespace ccf {

namespace {

int require_column(const csv::Table& t, const std::string& name, const char* file) {
  int c = t.column(name);
  if (c < 0)
    throw std::invalid_argument(std::string(file) + ": missing column '" + name + "'");
  return c;
}

}  // namespace

std::vector<CustomerRecord> load_customers(const csv::Table& table,
                                           const EncodingSchema& schema) {
  const int id_col = require_column(table, "customer_id", "customers.csv");
  std::vector<int> cols;
  for (const auto& c : schema.columns)
    cols.push_back(require_column(table, c.name, "customers.csv"));
  std::vector<CustomerRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    CustomerRecord r;
    r.id = row[static_cast<std::size_t>(id_col)];
    for (int c : cols) r.attrs.push_back(row[static_cast<std::size_t>(c)]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Transaction> load_transactions(const csv::Table& table) {
  const int id = require_column(table, "customer_id", "transactions.csv");
  const int day = require_column(table, "day", "transactions.csv");
  const int amount = require_column(table, "amount", "transactions.csv");
  std::vector<Transaction> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    auto d = csv::parse_long(row[static_cast<std::size_t>(day)]);
    auto a = csv::parse_double(row[static_cast<std::size_t>(amount)]);
    if (!d || !a)
      throw std::invalid_argument("transactions.csv: bad numeric field for customer " +
                                  row[static_cast<std::size_t>(id)]);
    out.push_back({row[static_cast<std::size_t>(id)], static_cast<int>(*d), *a});
  }
  return out;
}

std::vector<CouponAssignment> load_coupons(const csv::Table& table) {
  const int id = require_column(table, "customer_id", "coupons.csv");
  const int cat = require_column(table, "category", "coupons.csv");
  const int sd = require_column(table, "start_day", "coupons.csv");
  const int ed = require_column(table, "end_day", "coupons.csv");
  const int rd = require_column(table, "redeemed_day", "coupons.csv");
  std::vector<CouponAssignment> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    CouponAssignment a;
    a.customer_id = row[static_cast<std::size_t>(id)];
    a.category = row[static_cast<std::size_t>(cat)];
    auto s = csv::parse_long(row[static_cast<std::size_t>(sd)]);
    auto e = csv::parse_long(row[static_cast<std::size_t>(ed)]);
    if (!s || !e)
      throw std::invalid_argument("coupons.csv: bad validity days for customer " +
                                  a.customer_id);
    a.start_day = static_cast<int>(*s);
    a.end_day = static_cast<int>(*e);
    const auto& red = row[static_cast<std::size_t>(rd)];
    if (!red.empty()) {
      auto r = csv::parse_long(red);
      if (!r)
        throw std::invalid_argument("coupons.csv: bad redeemed_day for customer " +
                                    a.customer_id);
      a.redeemed_day = static_cast<int>(*r);
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace ccf
