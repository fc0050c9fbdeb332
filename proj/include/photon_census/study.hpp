#pragma once

// Monte Carlo evaluation of the estimator against the Cramer-Rao bound.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "photon_census/model.hpp"
#include "photon_census/search.hpp"

namespace photon_census {

double rmse(std::span<const double> estimates, double truth);

// (1/m) sum_j (1/n) sum_i |x_ij - x_j| / x_j; estimates is n x m.
double amape(const std::vector<std::vector<double>>& estimates, std::span<const double> truths);

struct McStudyConfig {
  ThetaVec theta_true;
  std::vector<std::uint64_t> nu_list;
  int n_mc = 1;
  std::uint64_t master_seed = 0;
  SearchConfig search;
  std::filesystem::path outputs;
};

McStudyConfig parse_mc_config(const std::string& json_text);
McStudyConfig load_mc_config(const std::filesystem::path& path);

struct TrialRecord {
  std::size_t nu_index = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  std::vector<int> emitters;        // canonical order, empty on failure
  std::vector<double> detect_probs;
  double log_lik = 0.0;
};

// Per-species columns are in canonical (ascending p) order.
struct McRow {
  std::uint64_t nu = 0;
  int successes = 0;
  int failures = 0;
  std::vector<double> rmse_M, rmse_p;
  std::vector<double> bias_M, bias_p;
  std::vector<double> emp_std_M, emp_std_p;
  std::vector<double> sqrt_crlb_M, sqrt_crlb_p;  // nan where the bound is singular
  double amape_M = 0.0;
  double amape_p = 0.0;
  double success_rate_M = 0.0;  // fraction of all trials with every M_j exact
};

struct McReport {
  std::vector<McRow> rows;
  std::vector<TrialRecord> trials;
};

// Seeds per trial come from (master_seed, nu index, trial index), so the
// report is independent of the worker count. A failed trial is recorded and
// excluded from the aggregates; the study throws only when every trial at
// some nu fails.
McReport run_mc_study(const McStudyConfig& config, unsigned workers = 0);

// mc_summary.csv and mc_trials.csv under `dir`.
void write_mc_report(const McReport& report, std::size_t m, const std::filesystem::path& dir);

}  // namespace photon_census
