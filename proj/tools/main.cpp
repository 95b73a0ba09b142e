// ccf: causal evaluation of coupon campaigns from pooled panel data.
//
// Subcommands: simulate, describe, evaluate, policy, robustness.
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccf/csv.hpp"
#include "ccf/dgp.hpp"
#include "ccf/dr_scores.hpp"
#include "ccf/gate.hpp"
#include "ccf/io.hpp"
#include "ccf/policy_tree.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// run bookkeeping

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::vector<std::pair<std::string, std::uint64_t>> outputs;
  std::vector<std::string> warnings;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << content;
    outputs.emplace_back(path, fnv1a(content));
  }

  void finish(const std::string& dir) {
    json j;
    j["tool"] = "ccf";
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = config;
    json outs = json::array();
    for (const auto& [file, hash] : outputs) {
      std::ostringstream hex;
      hex << std::hex << hash;
      outs.push_back({{"file", file}, {"fnv1a", hex.str()}});
    }
    j["outputs"] = std::move(outs);
    j["warnings"] = warnings;
    j["runtime_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
    fs::create_directories(dir);
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Expand `--config FILE` into trailing flags: every key=value line
/// becomes `--key value` unless that flag was given explicitly, so the
/// command line always wins.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string flag = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool given = false;
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (!given) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// configuration

struct RunConfig {
  std::string config_file;     // optional flat key=value file
  std::string data_dir;        // CSV inputs; empty means simulate from dgp.*
  std::string out_dir = "ccf_out";
  std::string category = "all";  // "all" = any + every observed category
  int trees = 2000;
  double subsample = 0.5;
  int mtry = 0;
  int min_leaf = 5;
  int folds = 2;
  int threads = 0;
  std::uint64_t seed = 42;
  double hist_bin = 1.0;
  int depth = ccf::kDefaultPolicyDepth;
  std::string reward = "dr-score";  // or "cate"
  double cost = 0.0;

  ccf::DgpConfig dgp;

  ccf::ForestParams forest_params() const {
    ccf::ForestParams p;
    p.num_trees = trees;
    p.subsample_fraction = subsample;
    p.mtry = mtry;
    p.min_leaf = min_leaf;
    p.seed = seed;
    p.n_threads = threads;
    return p;
  }

  json to_json() const {
    json j;
    j["data"] = data_dir;
    j["out"] = out_dir;
    j["category"] = category;
    j["trees"] = trees;
    j["subsample"] = subsample;
    j["mtry"] = mtry;
    j["min-leaf"] = min_leaf;
    j["folds"] = folds;
    j["threads"] = threads;
    j["seed"] = seed;
    j["hist-bin"] = hist_bin;
    j["depth"] = depth;
    j["reward"] = reward;
    j["cost"] = cost;
    j["dgp-customers"] = dgp.n_customers;
    j["dgp-periods"] = dgp.n_periods;
    j["dgp-period-length"] = dgp.period_length_days;
    j["dgp-noise-sd"] = dgp.noise_sd;
    j["dgp-missing-rate"] = dgp.missing_rate;
    j["dgp-tau-param"] = dgp.tau_param;
    j["dgp-propensity-param"] = dgp.propensity_param;
    j["dgp-seed"] = dgp.seed;
    return j;
  }
};

void add_output_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--out", cfg.out_dir, "Output directory")
      ->envname("CCF_OUT_DIR")
      ->capture_default_str();
  cmd->add_option("--config", cfg.config_file,
                  "Flat key=value config file; explicit flags override it");
}

void add_dgp_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--dgp-customers", cfg.dgp.n_customers, "Simulated customers")
      ->capture_default_str();
  cmd->add_option("--dgp-periods", cfg.dgp.n_periods, "Simulated periods")
      ->capture_default_str();
  cmd->add_option("--dgp-period-length", cfg.dgp.period_length_days,
                  "Days per simulated period")
      ->capture_default_str();
  cmd->add_option_function<std::string>(
         "--dgp-tau",
         [&cfg](const std::string& s) { cfg.dgp.tau_spec = ccf::tau_spec_from_string(s); },
         "Effect shape: constant|threshold|signed|linear");
  cmd->add_option("--dgp-tau-param", cfg.dgp.tau_param, "Effect magnitude")
      ->capture_default_str();
  cmd->add_option_function<std::string>(
         "--dgp-propensity",
         [&cfg](const std::string& s) {
           cfg.dgp.propensity_spec = ccf::propensity_spec_from_string(s);
         },
         "Assignment: uniform|logistic|unknown-penalized");
  cmd->add_option("--dgp-propensity-param", cfg.dgp.propensity_param,
                  "Assignment parameter")
      ->capture_default_str();
  cmd->add_option("--dgp-noise-sd", cfg.dgp.noise_sd, "Outcome noise SD")
      ->capture_default_str();
  cmd->add_option("--dgp-missing-rate", cfg.dgp.missing_rate,
                  "Share of unknown socio-economic cells")
      ->capture_default_str();
  cmd->add_option("--dgp-seed", cfg.dgp.seed, "Generator seed")->capture_default_str();
}

void add_pipeline_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--data", cfg.data_dir,
                  "Directory with customers.csv, transactions.csv, coupons.csv; "
                  "omit to run on simulated data");
  cmd->add_option("--category", cfg.category,
                  "Coupon category to analyze; 'any' pools all, 'all' runs every one")
      ->capture_default_str();
  cmd->add_option("--trees", cfg.trees, "Trees per forest")->capture_default_str();
  cmd->add_option("--subsample", cfg.subsample, "Cluster subsample fraction")
      ->capture_default_str();
  cmd->add_option("--mtry", cfg.mtry, "Split candidates per node; 0 = default rule")
      ->capture_default_str();
  cmd->add_option("--min-leaf", cfg.min_leaf, "Min treated and control per leaf")
      ->capture_default_str();
  cmd->add_option("--folds", cfg.folds, "Cross-fitting folds")->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "Worker threads; 0 = all cores")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Estimation seed")->capture_default_str();
  add_dgp_options(cmd, cfg);
  add_output_options(cmd, cfg);
}

// ---------------------------------------------------------------------------
// data loading

struct RawData {
  std::vector<ccf::CustomerRecord> customers;
  std::vector<ccf::Transaction> transactions;
  std::vector<ccf::CouponAssignment> coupons;
  ccf::EncodingSchema schema;
  std::vector<ccf::Period> periods;
};

RawData load_raw(const RunConfig& cfg) {
  return stage("load", [&] {
    RawData raw;
    raw.schema = ccf::default_customer_schema();
    if (cfg.data_dir.empty()) {
      auto sim = ccf::simulate(cfg.dgp);
      raw.customers = std::move(sim.customers);
      raw.transactions = std::move(sim.transactions);
      raw.coupons = std::move(sim.coupons);
    } else {
      raw.customers = ccf::load_customers(
          ccf::csv::read_file(cfg.data_dir + "/customers.csv"), raw.schema);
      raw.transactions =
          ccf::load_transactions(ccf::csv::read_file(cfg.data_dir + "/transactions.csv"));
      raw.coupons = ccf::load_coupons(ccf::csv::read_file(cfg.data_dir + "/coupons.csv"));
    }
    std::vector<ccf::CouponValidity> validities;
    for (const auto& c : raw.coupons)
      validities.push_back({c.category, c.start_day, c.end_day});
    raw.periods = ccf::partition_campaign_periods(validities);
    return raw;
  });
}

ccf::PanelDataset build_target_panel(const RawData& raw, const std::string& target,
                                     bool reduced) {
  auto panel = stage("build-panel", [&] {
    ccf::PanelBuildOptions opts;
    opts.target_category = target;
    return ccf::build_panel(raw.transactions, raw.coupons, raw.customers, raw.schema,
                            raw.periods, opts);
  });
  if (reduced)
    panel = stage("reduce", [&] {
      return ccf::filter_rows(panel, ccf::known_only_predicate(panel));
    });
  return panel;
}

// ---------------------------------------------------------------------------
// estimation pipeline

struct TargetFit {
  ccf::PanelDataset panel;
  ccf::NuisanceEstimates nuisances;
  ccf::CausalForest forest;
  std::vector<double> psi;  // out-of-bag CATE per observation
  ccf::DoublyRobustScores scores;
  ccf::AteResult ate;
  double robinson = 0.0;
};

TargetFit fit_target(ccf::PanelDataset panel, const RunConfig& cfg) {
  TargetFit fit{std::move(panel), {}, {}, {}, {}, {}, 0.0};
  const auto& ds = fit.panel;
  auto params = cfg.forest_params();

  stage("nuisance", [&] {
    std::vector<double> d(ds.treatment.begin(), ds.treatment.end());
    fit.nuisances.p_hat = ccf::clamp_propensity(
        ccf::crossfit_predict(ds.X, d, ds.cluster, params, cfg.folds));
    fit.nuisances.mu_hat =
        ccf::crossfit_predict(ds.X, ds.outcome, ds.cluster, params, cfg.folds);
    // arm means are reconstructed from the fitted CATE below
    fit.nuisances.mu1_hat = fit.nuisances.mu_hat;
    fit.nuisances.mu0_hat = fit.nuisances.mu_hat;
    return 0;
  });

  stage("causal-forest", [&] {
    fit.forest = ccf::fit_causal_forest(ds.X, ds.outcome, ds.treatment, ds.cluster,
                                        fit.nuisances, params);
    fit.psi = fit.forest.predict_cate_oob(ds.X, ds.cluster).first;
    return 0;
  });

  stage("scores", [&] {
    // mu1/mu0 consistent with the marginal fit and the estimated CATE:
    // mu = p mu1 + (1 - p) mu0 and mu1 - mu0 = psi
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      fit.nuisances.mu1_hat[i] =
          fit.nuisances.mu_hat[i] + (1.0 - fit.nuisances.p_hat[i]) * fit.psi[i];
      fit.nuisances.mu0_hat[i] =
          fit.nuisances.mu_hat[i] - fit.nuisances.p_hat[i] * fit.psi[i];
    }
    fit.scores =
        ccf::aipw_scores(ds.outcome, ds.treatment, ds.cluster, fit.nuisances, "ate");
    fit.ate = ccf::estimate_ate(fit.scores);
    fit.robinson = ccf::robinson_ate(ds.outcome, ds.treatment, fit.nuisances);
    return 0;
  });
  return fit;
}

void write_gates(const TargetFit& fit, const std::string& target, const std::string& dir,
                 Manifest& manifest) {
  const auto& ds = fit.panel;
  std::vector<std::pair<std::string, ccf::GroupScheme>> schemes;
  for (const char* block : {"age_group", "income_group", "family_size"}) {
    try {
      schemes.emplace_back(block, ccf::onehot_groups(ds, block));
    } catch (const std::exception& e) {
      manifest.warnings.push_back("gate " + std::string(block) + ": " + e.what());
    }
  }
  const int spend_col = ds.feature_index("lag_outcome");
  if (spend_col >= 0) {
    std::vector<double> spend;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
      spend.push_back(ds.X(i, static_cast<std::size_t>(spend_col)));
    try {
      schemes.emplace_back("spend_quartile",
                           ccf::quartile_groups(spend, "spend_quartile"));
    } catch (const std::exception& e) {
      manifest.warnings.push_back("gate spend_quartile: " + std::string(e.what()));
    }
  }
  for (const auto& [name, scheme] : schemes) {
    try {
      auto gate = ccf::estimate_gates(fit.scores, scheme);
      manifest.write_file(dir + "/gate_" + target + "_" + name + ".csv",
                          ccf::gate_csv(gate, scheme));
    } catch (const std::exception& e) {
      manifest.warnings.push_back("gate " + target + " " + name + ": " + e.what());
    }
  }
}

std::vector<std::string> evaluation_targets(const RunConfig& cfg, const RawData& raw) {
  if (cfg.category != "all") return {cfg.category};
  std::vector<std::string> targets = {"any"};
  std::set<std::string> cats;
  for (const auto& c : raw.coupons) cats.insert(c.category);
  targets.insert(targets.end(), cats.begin(), cats.end());
  return targets;
}

void run_evaluate(const RunConfig& cfg, const RawData& raw, const std::string& out_dir,
                  bool reduced, Manifest& manifest) {
  std::vector<std::pair<std::string, ccf::AteResult>> table;
  std::string robinson_csv = "estimand,coef\n";
  for (const auto& target : evaluation_targets(cfg, raw)) {
    auto fit = fit_target(build_target_panel(raw, target, reduced), cfg);

    manifest.write_file(out_dir + "/cate_" + target + ".csv",
                        ccf::histogram_csv(ccf::cate_histogram(fit.psi, cfg.hist_bin)));
    std::vector<std::string> customer_of_row;
    for (std::size_t i = 0; i < fit.panel.n_rows(); ++i)
      customer_of_row.push_back(
          fit.panel.cluster_ids[static_cast<std::size_t>(fit.panel.cluster[i])]);
    manifest.write_file(out_dir + "/scores_" + target + ".csv",
                        ccf::scores_csv(fit.scores, customer_of_row, fit.panel.period));
    write_gates(fit, target, out_dir, manifest);

    fit.ate.significance_code =
        ccf::significance_stars(fit.ate.theta, fit.ate.std_error);
    table.emplace_back(target, fit.ate);
    robinson_csv += target + "," + ccf::csv::fmt_g6(fit.robinson) + "\n";
    std::cout << "[" << target << "] n=" << fit.panel.n_rows()
              << " ate=" << ccf::csv::fmt_g6(fit.ate.theta)
              << " se=" << ccf::csv::fmt_g6(fit.ate.std_error)
              << fit.ate.significance_code << "\n";
  }
  manifest.write_file(out_dir + "/ate_table.csv", ccf::ate_table_csv(table));
  manifest.write_file(out_dir + "/ate_table.txt", ccf::ate_table_text(table));
  manifest.write_file(out_dir + "/robinson_ate.csv", robinson_csv);
}

// ---------------------------------------------------------------------------
// policy learning

struct PolicyFeatures {
  ccf::Matrix X;
  std::vector<std::string> names;
};

/// Targeting covariates: each one-hot block collapses to one ordinal code
/// (unknown = 0, then schema level order), lagged spending is binned to
/// the coarse expenditure grid, remaining continuous covariates pass
/// through. Period and concurrent-coupon indicators are excluded.
PolicyFeatures policy_features(const ccf::PanelDataset& ds) {
  struct Col {
    std::string name;
    bool binned = false;
    std::vector<std::pair<std::size_t, int>> onehot;  // (column, ordinal code)
    int source = -1;                                  // pass-through column
  };
  std::vector<Col> cols;
  std::map<std::string, std::size_t> block_of;
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
    const auto& name = ds.feature_names[j];
    auto colon = name.find(':');
    if (colon == std::string::npos) {
      Col c;
      c.name = name == "lag_outcome" ? "lag_outcome_binned" : name;
      c.binned = name == "lag_outcome";
      c.source = static_cast<int>(j);
      cols.push_back(std::move(c));
      continue;
    }
    const std::string prefix = name.substr(0, colon);
    const std::string level = name.substr(colon + 1);
    if (prefix == "period" || prefix == "now_coupon" || prefix == "lag_coupon") continue;
    auto [it, inserted] = block_of.try_emplace(prefix, cols.size());
    if (inserted) cols.push_back({prefix, false, {}, -1});
    Col& block = cols[it->second];
    // unknown maps to 0; real levels get 1, 2, ... in schema order
    int code = 0;
    if (level != "unknown") {
      for (const auto& [col, c] : block.onehot)
        if (c > 0) ++code;
      ++code;
    }
    block.onehot.emplace_back(j, code);
  }

  PolicyFeatures out;
  out.X = ccf::Matrix(ds.n_rows(), cols.size());
  for (const auto& c : cols) out.names.push_back(c.name);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const Col& c = cols[j];
      if (c.source >= 0) {
        double v = ds.X(i, static_cast<std::size_t>(c.source));
        out.X(i, j) = c.binned ? ccf::bin_expenditure(v) : v;
      } else {
        int code = 0;
        for (const auto& [col, lvl] : c.onehot)
          if (ds.X(i, col) > 0.5) code = lvl;
        out.X(i, j) = code;
      }
    }
  }
  return out;
}

void run_policy(const RunConfig& cfg, const RawData& raw, const std::string& out_dir,
                bool reduced, Manifest& manifest) {
  const std::string target = cfg.category == "all" ? "any" : cfg.category;
  auto fit = fit_target(build_target_panel(raw, target, reduced), cfg);

  std::vector<double> reward = cfg.reward == "cate" ? fit.psi : fit.scores.gamma;
  if (cfg.reward != "cate" && cfg.reward != "dr-score")
    throw std::invalid_argument("unknown reward: " + cfg.reward);
  for (auto& r : reward) r -= cfg.cost;

  auto features = stage("policy-features", [&] { return policy_features(fit.panel); });
  auto policy = stage("policy-search", [&] {
    return ccf::fit_policy_tree(features.X, reward, cfg.depth);
  });

  auto actions = ccf::apply_policy(policy.tree, features.X);
  long treated = 0;
  for (int a : actions) treated += a;
  const double check = ccf::policy_value(actions, reward);

  manifest.write_file(out_dir + "/policy_" + target + ".json",
                      ccf::policy_tree_json(policy.tree, features.names));
  manifest.write_file(out_dir + "/policy_" + target + ".dot",
                      ccf::policy_tree_dot(policy.tree, features.names));
  manifest.write_file(out_dir + "/policy_" + target + ".txt",
                      ccf::policy_tree_text(policy.tree, features.names));
  std::ostringstream report;
  report << "target," << target << "\nreward," << cfg.reward << "\ncost,"
         << ccf::csv::fmt_g6(cfg.cost) << "\ndepth," << cfg.depth << "\ndepth_used,"
         << policy.tree.depth_used << "\nvalue," << ccf::csv::fmt_g6(policy.value)
         << "\nvalue_check," << ccf::csv::fmt_g6(check) << "\ntreated_share,"
         << ccf::csv::fmt_g6(static_cast<double>(treated) /
                             static_cast<double>(actions.size()))
         << "\n";
  manifest.write_file(out_dir + "/policy_" + target + "_value.csv", report.str());
  std::cout << "[" << target << "] policy value=" << ccf::csv::fmt_g6(policy.value)
            << " treated=" << treated << "/" << actions.size() << "\n";
}

// ---------------------------------------------------------------------------
// subcommand bodies

int cmd_simulate(const RunConfig& cfg) {
  Manifest manifest;
  manifest.command = "simulate";
  manifest.config = cfg.to_json();
  auto sim = stage("simulate", [&] { return ccf::simulate(cfg.dgp); });
  ccf::write_dgp_csvs(sim, cfg.out_dir);
  for (const char* f : {"customers.csv", "transactions.csv", "coupons.csv", "truth.csv"}) {
    std::ifstream in(cfg.out_dir + "/" + f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    manifest.outputs.emplace_back(cfg.out_dir + "/" + f, fnv1a(buf.str()));
  }
  manifest.finish(cfg.out_dir);
  std::cout << "customers=" << sim.customers.size()
            << " transactions=" << sim.transactions.size()
            << " coupons=" << sim.coupons.size()
            << " panel_rows=" << sim.panel.n_rows()
            << " true_ate=" << ccf::csv::fmt_g6(ccf::true_ate(sim.truth)) << "\n";
  return 0;
}

int cmd_describe(const RunConfig& cfg) {
  Manifest manifest;
  manifest.command = "describe";
  manifest.config = cfg.to_json();
  auto raw = load_raw(cfg);
  const std::string target = cfg.category == "all" ? "any" : cfg.category;
  auto panel = build_target_panel(raw, target, false);
  auto rows = ccf::describe(panel);
  manifest.write_file(cfg.out_dir + "/describe_" + target + ".csv",
                      ccf::describe_csv(rows));
  manifest.finish(cfg.out_dir);
  std::cout << ccf::describe_csv(rows);
  for (const auto& d : panel.diagnostics) std::cerr << "note: " << d << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  Manifest manifest;
  manifest.command = "evaluate";
  manifest.config = cfg.to_json();
  auto raw = load_raw(cfg);
  run_evaluate(cfg, raw, cfg.out_dir, false, manifest);
  manifest.finish(cfg.out_dir);
  return 0;
}

int cmd_policy(const RunConfig& cfg) {
  Manifest manifest;
  manifest.command = "policy";
  manifest.config = cfg.to_json();
  auto raw = load_raw(cfg);
  run_policy(cfg, raw, cfg.out_dir, false, manifest);
  manifest.finish(cfg.out_dir);
  return 0;
}

int cmd_robustness(const RunConfig& cfg) {
  Manifest manifest;
  manifest.command = "robustness";
  manifest.config = cfg.to_json();
  auto raw = load_raw(cfg);
  const std::string out = cfg.out_dir + "_reduced";
  run_evaluate(cfg, raw, out, true, manifest);
  run_policy(cfg, raw, out, true, manifest);
  manifest.finish(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal evaluation of coupon campaigns (honest forests, AIPW, policy trees)"};
  app.require_subcommand(1);

  RunConfig cfg;

  auto* sim = app.add_subcommand("simulate", "Write synthetic campaign CSVs + ground truth");
  add_dgp_options(sim, cfg);
  add_output_options(sim, cfg);

  auto* describe = app.add_subcommand("describe", "Summary statistics by treatment arm");
  describe->add_option("--data", cfg.data_dir, "CSV input directory");
  describe->add_option("--category", cfg.category, "Coupon category ('any' pools all)")
      ->capture_default_str();
  add_dgp_options(describe, cfg);
  add_output_options(describe, cfg);

  auto* evaluate =
      app.add_subcommand("evaluate", "ATE/GATE/CATE estimation with run manifest");
  add_pipeline_options(evaluate, cfg);
  evaluate->add_option("--hist-bin", cfg.hist_bin, "CATE histogram bin width")
      ->capture_default_str();

  auto* policy = app.add_subcommand("policy", "Fit the depth-k targeting tree");
  add_pipeline_options(policy, cfg);
  policy->add_option("--depth", cfg.depth, "Maximum tree depth")->capture_default_str();
  policy->add_option("--reward", cfg.reward, "Reward vector: cate|dr-score")
      ->capture_default_str();
  policy->add_option("--cost", cfg.cost, "Per-treatment cost subtracted from rewards")
      ->capture_default_str();

  auto* robustness =
      app.add_subcommand("robustness", "Re-run the analysis on the known-only subset");
  add_pipeline_options(robustness, cfg);
  robustness->add_option("--hist-bin", cfg.hist_bin, "CATE histogram bin width")
      ->capture_default_str();
  robustness->add_option("--depth", cfg.depth, "Maximum tree depth")
      ->capture_default_str();
  robustness->add_option("--reward", cfg.reward, "Reward vector: cate|dr-score")
      ->capture_default_str();
  robustness->add_option("--cost", cfg.cost, "Per-treatment cost")->capture_default_str();

  try {
    auto args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg);
    if (describe->parsed()) return cmd_describe(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (policy->parsed()) return cmd_policy(cfg);
    if (robustness->parsed()) return cmd_robustness(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
