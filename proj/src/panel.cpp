#include "ccf/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "ccf/csv.hpp"

namespace ccf {

std::vector<Period> partition_campaign_periods(const std::vector<CouponValidity>& validities) {
  if (validities.empty()) throw std::invalid_argument("no campaigns");
  for (const auto& v : validities) {
    if (v.start_day < 0 || v.end_day < v.start_day)
      throw std::invalid_argument("invalid validity interval for category " + v.category);
  }
  std::vector<int> cuts;
  for (const auto& v : validities) {
    cuts.push_back(v.start_day);
    cuts.push_back(v.end_day + 1);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Period> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Period p;
    p.start_day = cuts[i];
    p.end_day = cuts[i + 1] - 1;
    for (const auto& v : validities)
      if (v.start_day <= p.start_day && v.end_day >= p.start_day) p.active.insert(v.category);
    // coarsest partition: merge neighbors with identical active sets
    if (!out.empty() && out.back().active == p.active) {
      out.back().end_day = p.end_day;
    } else {
      out.push_back(std::move(p));
    }
  }
  return out;
}

EncodingSchema default_customer_schema() {
  EncodingSchema s;
  s.columns = {
      {"age_group", true, {"18-25", "26-35", "36-45", "46-55", "56+", "unknown"}},
      {"family_size", true, {"1", "2", "3", "4", "5+", "unknown"}},
      {"marital_status", true, {"single", "married", "unknown"}},
      {"dwelling", true, {"rented", "owned", "unknown"}},
      {"income_group", true, {"1", "2", "3", "4", "5", "6", "7", "8", "unknown"}},
  };
  return s;
}

std::pair<Matrix, std::vector<std::string>> encode_covariates(
    const std::vector<std::vector<std::string>>& rows, const EncodingSchema& schema) {
  std::vector<std::string> names;
  std::vector<std::pair<std::size_t, std::size_t>> offsets;  // (first column, width)
  std::size_t k = 0;
  for (const auto& col : schema.columns) {
    offsets.emplace_back(k, col.categorical ? col.levels.size() : 1);
    if (col.categorical) {
      for (const auto& lvl : col.levels) names.push_back(col.name + ":" + lvl);
      k += col.levels.size();
    } else {
      names.push_back(col.name);
      k += 1;
    }
  }
  Matrix X(rows.size(), k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.columns.size())
      throw std::invalid_argument("encode_covariates: row width mismatch");
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& col = schema.columns[c];
      const std::string& cell = rows[r][c];
      if (col.categorical) {
        auto it = std::find(col.levels.begin(), col.levels.end(), cell);
        if (it == col.levels.end())
          throw std::invalid_argument("encode_covariates: unseen level '" + cell +
                                      "' in column '" + col.name + "'");
        X(r, offsets[c].first + static_cast<std::size_t>(it - col.levels.begin())) = 1.0;
      } else {
        auto v = csv::parse_double(cell);
        if (!v)
          throw std::invalid_argument("encode_covariates: non-numeric value '" + cell +
                                      "' in continuous column '" + col.name + "'");
        X(r, offsets[c].first) = *v;
      }
    }
  }
  return {std::move(X), std::move(names)};
}

std::size_t PanelDataset::n_customers() const {
  std::set<int> c(cluster.begin(), cluster.end());
  return c.size();
}

int PanelDataset::feature_index(const std::string& name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i)
    if (feature_names[i] == name) return static_cast<int>(i);
  return -1;
}

void PanelDataset::validate() const {
  const std::size_t n = n_rows();
  if (X.rows != n || treatment.size() != n || cluster.size() != n || period.size() != n)
    throw std::logic_error("panel: inconsistent column lengths");
  if (X.cols != feature_names.size())
    throw std::logic_error("panel: feature name count mismatch");
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment[i] != 0 && treatment[i] != 1)
      throw std::logic_error("panel: treatment not binary");
    if (!seen.emplace(cluster[i], period[i]).second)
      throw std::logic_error("panel: duplicate (customer, period) observation");
    for (std::size_t j = 0; j < X.cols; ++j)
      if (!std::isfinite(X(i, j))) throw std::logic_error("panel: non-finite covariate");
  }
}

namespace {

std::vector<std::string> support_diagnostics(const PanelDataset& ds) {
  std::map<int, std::pair<int, int>> counts;  // period -> (treated, control)
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    auto& c = counts[ds.period[i]];
    if (ds.treatment[i]) ++c.first;
    else ++c.second;
  }
  std::vector<std::string> out;
  for (const auto& [t, c] : counts) {
    if (c.first == 0)
      out.push_back("period " + std::to_string(t) + ": no treated observations");
    if (c.second == 0)
      out.push_back("period " + std::to_string(t) + ": no control observations");
  }
  return out;
}

}  // namespace

PanelDataset build_panel(const std::vector<Transaction>& transactions,
                         const std::vector<CouponAssignment>& assignments,
                         const std::vector<CustomerRecord>& customers,
                         const EncodingSchema& customer_schema,
                         const std::vector<Period>& periods,
                         const PanelBuildOptions& options) {
  const int T = static_cast<int>(periods.size());
  if (T < 2) throw std::invalid_argument("build_panel: need at least 2 periods");

  std::map<std::string, int> cust_index;
  for (std::size_t i = 0; i < customers.size(); ++i)
    cust_index[customers[i].id] = static_cast<int>(i);

  std::set<std::string> missing;
  for (const auto& a : assignments)
    if (!cust_index.count(a.customer_id)) missing.insert(a.customer_id);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "build_panel: assignments reference unknown customers:";
    for (const auto& id : missing) msg << ' ' << id;
    throw std::invalid_argument(msg.str());
  }

  std::set<std::string> cats;
  for (const auto& a : assignments) cats.insert(a.category);
  std::vector<std::string> registry(cats.begin(), cats.end());
  auto cat_index = [&](const std::string& c) {
    return static_cast<int>(std::lower_bound(registry.begin(), registry.end(), c) -
                            registry.begin());
  };

  auto period_of_day = [&](int day) -> int {
    for (int t = 0; t < T; ++t)
      if (day >= periods[t].start_day && day <= periods[t].end_day) return t;
    return -1;
  };

  const std::size_t C = customers.size();
  const std::size_t K = registry.size();
  std::vector<double> spend(C * T, 0.0);
  std::vector<std::uint8_t> received(C * T * K, 0), redeemed(C * T * K, 0);

  std::vector<std::string> diags;
  for (const auto& tx : transactions) {
    auto it = cust_index.find(tx.customer_id);
    if (it == cust_index.end()) {
      diags.push_back("transaction for unregistered customer " + tx.customer_id + " ignored");
      continue;
    }
    int t = period_of_day(tx.day);
    if (t < 0) continue;  // outside the campaign timeline
    spend[static_cast<std::size_t>(it->second) * T + t] += tx.amount;
  }
  for (const auto& a : assignments) {
    int ci = cust_index.at(a.customer_id);
    int ki = cat_index(a.category);
    for (int t = 0; t < T; ++t) {
      if (a.start_day <= periods[t].end_day && a.end_day >= periods[t].start_day)
        received[(static_cast<std::size_t>(ci) * T + t) * K + ki] = 1;
    }
    if (a.redeemed_day) {
      int t = period_of_day(*a.redeemed_day);
      if (t >= 0) redeemed[(static_cast<std::size_t>(ci) * T + t) * K + ki] = 1;
    }
  }

  std::vector<std::vector<std::string>> attr_rows;
  attr_rows.reserve(C);
  for (const auto& c : customers) attr_rows.push_back(c.attrs);
  auto [socio, socio_names] = encode_covariates(attr_rows, customer_schema);

  const bool targeted = options.target_category != "any";
  if (targeted && !cats.count(options.target_category))
    throw std::invalid_argument("build_panel: unknown target category " + options.target_category);

  std::vector<std::string> names = socio_names;
  // period dummies, first panel period (t=2) as reference
  for (int t = 3; t <= T; ++t) names.push_back("period:" + std::to_string(t));
  names.push_back("lag_outcome");
  names.push_back("lag_any_coupon");
  names.push_back("lag_any_redeemed");
  for (const auto& c : registry) names.push_back("lag_coupon:" + c);
  if (targeted)
    for (const auto& c : registry)
      if (c != options.target_category) names.push_back("now_coupon:" + c);

  PanelDataset ds;
  ds.feature_names = names;
  ds.category_registry = registry;
  ds.n_periods = T;
  const std::size_t n = C * static_cast<std::size_t>(T - 1);
  ds.X = Matrix(n, names.size());
  ds.outcome.resize(n);
  ds.treatment.resize(n);
  ds.cluster.resize(n);
  ds.period.resize(n);
  ds.cluster_ids.reserve(C);
  for (const auto& c : customers) ds.cluster_ids.push_back(c.id);

  std::size_t row = 0;
  for (std::size_t ci = 0; ci < C; ++ci) {
    for (int t = 2; t <= T; ++t, ++row) {
      const int ti = t - 1;       // 0-based current period
      const int li = t - 2;       // 0-based lagged period
      ds.cluster[row] = static_cast<int>(ci);
      ds.period[row] = t;
      ds.outcome[row] = spend[ci * T + ti] / periods[ti].length_days();

      bool any_now = false, target_now = false;
      for (std::size_t ki = 0; ki < K; ++ki) {
        if (received[(ci * T + ti) * K + ki]) {
          any_now = true;
          if (targeted && registry[ki] == options.target_category) target_now = true;
        }
      }
      ds.treatment[row] = static_cast<std::int8_t>(targeted ? target_now : any_now);

      std::size_t j = 0;
      for (; j < socio.cols; ++j) ds.X(row, j) = socio(ci, j);
      for (int pt = 3; pt <= T; ++pt, ++j) ds.X(row, j) = (pt == t) ? 1.0 : 0.0;
      ds.X(row, j++) = spend[ci * T + li] / periods[li].length_days();
      bool any_lag = false, red_lag = false;
      for (std::size_t ki = 0; ki < K; ++ki) {
        if (received[(ci * T + li) * K + ki]) any_lag = true;
        if (redeemed[(ci * T + li) * K + ki]) red_lag = true;
      }
      ds.X(row, j++) = any_lag ? 1.0 : 0.0;
      ds.X(row, j++) = red_lag ? 1.0 : 0.0;
      for (std::size_t ki = 0; ki < K; ++ki)
        ds.X(row, j++) = received[(ci * T + li) * K + ki] ? 1.0 : 0.0;
      if (targeted)
        for (std::size_t ki = 0; ki < K; ++ki)
          if (registry[ki] != options.target_category)
            ds.X(row, j++) = received[(ci * T + ti) * K + ki] ? 1.0 : 0.0;
    }
  }

  ds.validate();
  auto support = support_diagnostics(ds);
  diags.insert(diags.end(), support.begin(), support.end());
  ds.diagnostics = std::move(diags);
  return ds;
}

double welch_p_value(std::span<const double> a, std::span<const double> b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  if (na < 2 || nb < 2) return std::numeric_limits<double>::quiet_NaN();
  double ma = 0, mb = 0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= na;
  mb /= nb;
  double va = 0, vb = 0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= (na - 1);
  vb /= (nb - 1);
  const double sa = va / na, sb = vb / nb;
  if (sa + sb == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) /
                    (sa * sa / (na - 1) + sb * sb / (nb - 1));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

std::vector<DescribeRow> describe(const PanelDataset& ds, bool by_treatment) {
  if (ds.n_rows() == 0) throw std::invalid_argument("describe: empty dataset");
  const std::size_t n = ds.n_rows();

  std::vector<int> treated, control;
  for (std::size_t i = 0; i < n; ++i)
    (ds.treatment[i] ? treated : control).push_back(static_cast<int>(i));

  auto column = [&](const std::string& name, auto getter) {
    DescribeRow r;
    r.variable = name;
    std::vector<double> all(n), tr, co;
    for (std::size_t i = 0; i < n; ++i) all[i] = getter(i);
    double s = 0;
    for (double v : all) s += v;
    r.mean_all = s / static_cast<double>(n);
    if (!by_treatment || treated.empty() || control.empty()) {
      r.defined = by_treatment ? false : true;
      r.mean_treated = r.mean_control = r.diff = std::numeric_limits<double>::quiet_NaN();
      r.p_value = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    for (int i : treated) tr.push_back(all[static_cast<std::size_t>(i)]);
    for (int i : control) co.push_back(all[static_cast<std::size_t>(i)]);
    double st = 0, sc = 0;
    for (double v : tr) st += v;
    for (double v : co) sc += v;
    r.mean_treated = st / static_cast<double>(tr.size());
    r.mean_control = sc / static_cast<double>(co.size());
    r.diff = r.mean_treated - r.mean_control;
    r.p_value = welch_p_value(tr, co);
    return r;
  };

  std::vector<DescribeRow> out;
  out.push_back(column("outcome", [&](std::size_t i) { return ds.outcome[i]; }));
  for (std::size_t j = 0; j < ds.n_features(); ++j)
    out.push_back(column(ds.feature_names[j], [&, j](std::size_t i) { return ds.X(i, j); }));
  return out;
}

std::string describe_csv(const std::vector<DescribeRow>& rows) {
  csv::Table t;
  t.header = {"variable", "mean_all", "mean_treated", "mean_control", "diff", "p_value"};
  for (const auto& r : rows) {
    if (r.defined) {
      t.rows.push_back({r.variable, csv::fmt_g6(r.mean_all), csv::fmt_g6(r.mean_treated),
                        csv::fmt_g6(r.mean_control), csv::fmt_g6(r.diff),
                        csv::fmt_g6(r.p_value)});
    } else {
      t.rows.push_back({r.variable, csv::fmt_g6(r.mean_all), "NA", "NA", "NA", "NA"});
    }
  }
  return csv::format(t);
}

PanelDataset filter_rows(const PanelDataset& ds,
                         const std::function<bool(std::span<const double>)>& keep) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (keep(ds.X.row(i))) idx.push_back(static_cast<int>(i));
  if (idx.empty()) throw std::invalid_argument("filter_rows: predicate selects zero rows");

  PanelDataset out;
  out.feature_names = ds.feature_names;
  out.category_registry = ds.category_registry;
  out.n_periods = ds.n_periods;
  out.X = ds.X.take_rows(idx);

  std::map<int, int> remap;
  for (int i : idx) remap.emplace(ds.cluster[static_cast<std::size_t>(i)], 0);
  int next = 0;
  for (auto& [old_id, new_id] : remap) {
    new_id = next++;
    out.cluster_ids.push_back(ds.cluster_ids[static_cast<std::size_t>(old_id)]);
  }
  for (int i : idx) {
    auto u = static_cast<std::size_t>(i);
    out.outcome.push_back(ds.outcome[u]);
    out.treatment.push_back(ds.treatment[u]);
    out.cluster.push_back(remap.at(ds.cluster[u]));
    out.period.push_back(ds.period[u]);
  }
  out.validate();
  out.diagnostics = support_diagnostics(out);
  return out;
}

std::function<bool(std::span<const double>)> known_only_predicate(const PanelDataset& ds) {
  std::vector<std::size_t> unknown_cols;
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
    const auto& nm = ds.feature_names[j];
    if (nm.size() >= 8 && nm.substr(nm.size() - 8) == ":unknown")
      unknown_cols.push_back(j);
  }
  return [unknown_cols](std::span<const double> row) {
    for (std::size_t j : unknown_cols)
      if (row[j] != 0.0) return false;
    return true;
  };
}

}  // namespace ccf
