#include "photon_census/study.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "photon_census/crlb.hpp"
#include "photon_census/errors.hpp"
#include "photon_census/io.hpp"
#include "photon_census/parallel.hpp"
#include "photon_census/rng.hpp"
#include "photon_census/synth.hpp"

namespace photon_census {

namespace {

using nlohmann::json;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population (1/n) standard deviation, so that rmse^2 = bias^2 + std^2.
double std_of(std::span<const double> v) {
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

ThetaVec theta_from_json(const json& j) {
  if (j.is_string()) return parse_theta(j.get<std::string>());
  std::vector<SpeciesParams> species;
  for (const auto& s : j) species.push_back({s.at("M").get<int>(), s.at("p").get<double>()});
  return ThetaVec(std::move(species));
}

}  // namespace

double rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw DomainError("rmse of an empty list");
  double s = 0.0;
  for (double x : estimates) s += (x - truth) * (x - truth);
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

double amape(const std::vector<std::vector<double>>& estimates, std::span<const double> truths) {
  if (estimates.empty() || truths.empty()) throw DomainError("amape needs at least one trial and one species");
  for (double t : truths) {
    if (t == 0.0) throw DomainError("amape is undefined for a zero true value");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < truths.size(); ++j) {
    double inner = 0.0;
    for (const auto& trial : estimates) {
      if (trial.size() != truths.size()) throw DomainError("amape dimension mismatch");
      inner += std::abs((trial[j] - truths[j]) / truths[j]);
    }
    total += inner / static_cast<double>(estimates.size());
  }
  return total / static_cast<double>(truths.size());
}

McStudyConfig parse_mc_config(const std::string& json_text) {
  const json doc = json::parse(json_text);
  McStudyConfig cfg{theta_from_json(doc.at("theta_true")), doc.at("nu_list").get<std::vector<std::uint64_t>>(),
                    doc.value("n_mc", 1), doc.value("master_seed", std::uint64_t{0}), SearchConfig{},
                    doc.value("outputs", std::string{})};
  if (cfg.n_mc < 1) throw DomainError("n_mc must be >= 1");
  if (cfg.nu_list.empty()) throw DomainError("nu_list must not be empty");
  for (std::size_t k = 0; k < cfg.nu_list.size(); ++k) {
    if (cfg.nu_list[k] < 1 || (k > 0 && cfg.nu_list[k] <= cfg.nu_list[k - 1])) {
      throw DomainError("nu_list must be positive and strictly increasing");
    }
  }
  cfg.search.m = static_cast<int>(cfg.theta_true.size());
  if (doc.contains("search")) {
    const auto& s = doc["search"];
    cfg.search.m = s.value("m", cfg.search.m);
    if (s.contains("pool")) cfg.search.pool = PoolRange{s["pool"].at(0).get<int>(), s["pool"].at(1).get<int>()};
    cfg.search.allow_repeats = s.value("allow_repeats", true);
    cfg.search.top_k_report = s.value("top_k_report", 5);
    if (s.contains("em")) {
      const auto& e = s["em"];
      cfg.search.em.max_iter = e.value("max_iter", cfg.search.em.max_iter);
      cfg.search.em.tol = e.value("tol", cfg.search.em.tol);
    }
  }
  return cfg;
}

McStudyConfig load_mc_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_mc_config(buffer.str());
}

McReport run_mc_study(const McStudyConfig& config, unsigned workers) {
  const ThetaVec& truth = config.theta_true;
  const std::size_t m = truth.size();
  const std::size_t n_nu = config.nu_list.size();
  const auto n_mc = static_cast<std::size_t>(config.n_mc);

  McReport report;
  report.trials.resize(n_nu * n_mc);
  SearchConfig search = config.search;
  search.workers = 1;

  parallel_for(report.trials.size(), worker_count(workers), [&](std::size_t t) {
    TrialRecord& rec = report.trials[t];
    rec.nu_index = t / n_mc;
    rec.trial = static_cast<int>(t % n_mc);
    rec.seed = derive_seed(config.master_seed, rec.nu_index, static_cast<std::uint64_t>(rec.trial));
    try {
      const Histogram hist = sample_counts({truth, config.nu_list[rec.nu_index], rec.seed}, 1);
      const SearchResult result = run_search(hist, search);
      rec.emitters = result.best.theta.emitters();
      rec.detect_probs = result.best.theta.detect_probs();
      rec.log_lik = result.best.log_lik;
      rec.ok = result.best.converged;
      if (!rec.ok) rec.failure = "winning candidate did not converge";
    } catch (const std::exception& e) {
      rec.failure = e.what();
    }
  });

  const auto true_M = truth.emitters();
  const auto true_p = truth.detect_probs();
  for (std::size_t k = 0; k < n_nu; ++k) {
    McRow row;
    row.nu = config.nu_list[k];
    std::vector<std::vector<double>> est_M(m), est_p(m);
    std::vector<std::vector<double>> trials_M, trials_p;
    int exact = 0;
    for (std::size_t t = 0; t < n_mc; ++t) {
      const TrialRecord& rec = report.trials[k * n_mc + t];
      if (!rec.ok || rec.emitters.size() != m) {
        ++row.failures;
        continue;
      }
      ++row.successes;
      std::vector<double> tm(m), tp(m);
      for (std::size_t j = 0; j < m; ++j) {
        tm[j] = rec.emitters[j];
        tp[j] = rec.detect_probs[j];
        est_M[j].push_back(tm[j]);
        est_p[j].push_back(tp[j]);
      }
      if (rec.emitters == true_M) ++exact;
      trials_M.push_back(std::move(tm));
      trials_p.push_back(std::move(tp));
    }
    if (row.successes == 0) {
      throw NumericalError(fmt::format("every trial failed at nu = {}", row.nu));
    }
    row.success_rate_M = static_cast<double>(exact) / static_cast<double>(n_mc);
    std::vector<double> tM(true_M.begin(), true_M.end());
    row.amape_M = amape(trials_M, tM);
    row.amape_p = amape(trials_p, true_p);

    std::vector<double> bound_std(2 * m, std::numeric_limits<double>::quiet_NaN());
    try {
      const CrlbResult bound = crlb(truth, static_cast<double>(row.nu));
      if (!bound.singular) bound_std = bound.per_parameter_std;
    } catch (const std::exception&) {
      // bound undefined (p on the boundary)
    }
    for (std::size_t j = 0; j < m; ++j) {
      row.rmse_M.push_back(rmse(est_M[j], tM[j]));
      row.rmse_p.push_back(rmse(est_p[j], true_p[j]));
      row.bias_M.push_back(mean_of(est_M[j]) - tM[j]);
      row.bias_p.push_back(mean_of(est_p[j]) - true_p[j]);
      row.emp_std_M.push_back(std_of(est_M[j]));
      row.emp_std_p.push_back(std_of(est_p[j]));
      row.sqrt_crlb_M.push_back(bound_std[2 * j]);
      row.sqrt_crlb_p.push_back(bound_std[2 * j + 1]);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_mc_report(const McReport& report, std::size_t m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "mc_summary.csv");
    out << "nu,successes,failures";
    for (const char* col : {"rmse_M", "rmse_p", "bias_M", "bias_p", "emp_std_M", "emp_std_p", "sqrt_crlb_M",
                            "sqrt_crlb_p"}) {
      for (std::size_t j = 1; j <= m; ++j) out << ',' << col << '_' << j;
    }
    out << ",amape_M,amape_p,success_rate_M\n";
    for (const auto& row : report.rows) {
      out << row.nu << ',' << row.successes << ',' << row.failures;
      for (const auto* col : {&row.rmse_M, &row.rmse_p, &row.bias_M, &row.bias_p, &row.emp_std_M, &row.emp_std_p,
                              &row.sqrt_crlb_M, &row.sqrt_crlb_p}) {
        for (double v : *col) out << ',' << format_real(v);
      }
      out << ',' << format_real(row.amape_M) << ',' << format_real(row.amape_p) << ','
          << format_real(row.success_rate_M) << '\n';
    }
  }
  {
    std::ofstream out(dir / "mc_trials.csv");
    out << "nu_index,trial,seed,ok";
    for (std::size_t j = 1; j <= m; ++j) out << ",M_" << j;
    for (std::size_t j = 1; j <= m; ++j) out << ",p_" << j;
    out << ",log_lik,failure\n";
    for (const auto& rec : report.trials) {
      out << rec.nu_index << ',' << rec.trial << ',' << rec.seed << ',' << (rec.ok ? "true" : "false");
      const bool has = !rec.emitters.empty();
      for (std::size_t j = 0; j < m; ++j) out << ',' << (has ? std::to_string(rec.emitters[j]) : "");
      for (std::size_t j = 0; j < m; ++j) out << ',' << (has ? format_real(rec.detect_probs[j]) : "");
      out << ',' << (has ? format_real(rec.log_lik) : "") << ',';
      // failure reasons are free text; keep the CSV single-column
      std::string reason = rec.failure;
      for (char& c : reason) {
        if (c == ',' || c == '\n') c = ';';
      }
      out << reason << '\n';
    }
  }
}

}  // namespace photon_census
