#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "photon_census/crlb.hpp"
#include "photon_census/em.hpp"
#include "photon_census/errors.hpp"
#include "photon_census/io.hpp"
#include "photon_census/model.hpp"
#include "photon_census/search.hpp"
#include "photon_census/study.hpp"
#include "photon_census/synth.hpp"

namespace photon_census {

namespace {

// Writes to `path`, or to `fallback` when path is empty.
template <typename Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) throw DomainError("cannot write " + path);
  write(file);
}

// "a:b:step" or "v1,v2,...".
std::vector<double> parse_prob_grid(const std::string& text) {
  std::vector<double> out;
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    const double lo = std::stod(text.substr(0, c1));
    const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (!(step > 0.0) || hi < lo) throw DomainError("probability grid must look like lo:hi:step with lo <= hi");
    for (int k = 0;; ++k) {
      const double v = std::round((lo + k * step) * 1e12) / 1e12;
      if (v > hi + 1e-12) break;
      out.push_back(v);
    }
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(std::stod(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

BoundScale parse_scale(const std::string& s) {
  if (s == "std") return BoundScale::StdDev;
  if (s == "variance") return BoundScale::Variance;
  throw DomainError("scale must be 'std' or 'variance'");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emitter counting from photon-number-resolved histograms"};
  app.require_subcommand(1);

  std::string theta_text, out_path;

  auto* pmf_cmd = app.add_subcommand("pmf", "Write the photon-count PMF for theta as CSV");
  pmf_cmd->add_option("--theta", theta_text, "Species as M:p[,M:p...]")->required();
  pmf_cmd->add_option("--out", out_path, "Output CSV (stdout if omitted)");

  std::uint64_t nu = 0, seed = 0;
  std::string method = "direct";
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic photon-count histogram");
  sim_cmd->add_option("--theta", theta_text, "Species as M:p[,M:p...]")->required();
  sim_cmd->add_option("--nu", nu, "Number of experiments")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", seed, "RNG seed");
  sim_cmd->add_option("--method", method, "direct | inversion")->check(CLI::IsMember({"direct", "inversion"}));
  sim_cmd->add_option("--out", out_path, "Output file (.csv or .json; stdout CSV if omitted)");

  std::string hist_path, pool_text, table_path;
  int m = 1, max_iter = 1000, top_k = 5;
  double tol = 1e-10;
  bool no_repeats = false;
  unsigned threads = 0;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate (M_j, p_j) with the moment-seeded candidate search");
  est_cmd->add_option("--hist", hist_path, "Histogram file (.csv or .json)")->required();
  est_cmd->add_option("--m", m, "Number of species")->required()->check(CLI::Range(1, 4));
  est_cmd->add_option("--pool", pool_text, "Candidate emitter pool lo:hi");
  est_cmd->add_flag("--no-repeats", no_repeats, "Exclude candidates with repeated emitter counts");
  est_cmd->add_option("--max-iter", max_iter, "EM iteration cap");
  est_cmd->add_option("--tol", tol, "EM relative log-likelihood tolerance");
  est_cmd->add_option("--top-k", top_k, "Rows written to the ranked table (0 = all)");
  est_cmd->add_option("--table", table_path, "Ranked candidate CSV");
  est_cmd->add_option("--threads", threads, "Worker threads");
  est_cmd->add_option("--out", out_path, "Result JSON (stdout if omitted)");

  double nu_real = 1.0;
  auto* crlb_cmd = app.add_subcommand("crlb", "Fisher information and Cramer-Rao bound at theta");
  crlb_cmd->add_option("--theta", theta_text, "Species as M:p[,M:p...]")->required();
  crlb_cmd->add_option("--nu", nu_real, "Number of experiments")->check(CLI::PositiveNumber);
  crlb_cmd->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  std::optional<std::size_t> param_index;
  std::string grid_m, grid_p, fixed_text, scale_text = "std", param_kind = "M";
  double target = 0.01;
  bool log10_column = false;
  auto* nu_cmd = app.add_subcommand("nu-required", "Experiments needed to reach a relative CRLB target");
  nu_cmd->add_option("--theta", theta_text, "Species as M:p[,M:p...] (single-point mode)");
  nu_cmd->add_option("--param", param_index, "Parameter index in [M_1, p_1, ...] order (single-point mode)");
  nu_cmd->add_option("--grid-M", grid_m, "Swept emitter range lo:hi (grid mode)");
  nu_cmd->add_option("--grid-p", grid_p, "Swept probabilities lo:hi:step or a comma list (grid mode)");
  nu_cmd->add_option("--fixed", fixed_text, "Fixed species added to every grid cell, M:p[,M:p...]");
  nu_cmd->add_option("--param-kind", param_kind, "Bounded parameter of the swept species: M | p")
      ->check(CLI::IsMember({"M", "p"}));
  nu_cmd->add_option("--target", target, "Relative accuracy target")->check(CLI::PositiveNumber);
  nu_cmd->add_option("--scale", scale_text, "std | variance")->check(CLI::IsMember({"std", "variance"}));
  nu_cmd->add_flag("--log10", log10_column, "Add a log10(nu) column");
  nu_cmd->add_option("--threads", threads, "Worker threads");
  nu_cmd->add_option("--out", out_path, "Output (stdout if omitted)");

  std::string config_path, out_dir;
  auto* mc_cmd = app.add_subcommand("mc", "Run a Monte Carlo study from a JSON config");
  mc_cmd->add_option("--config", config_path, "Study config JSON")->required()->check(CLI::ExistingFile);
  mc_cmd->add_option("--out-dir", out_dir, "Output directory (overrides the config's outputs)");
  mc_cmd->add_option("--threads", threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pmf_cmd) {
      const PmfTable pmf = convolve_pmf(parse_theta(theta_text));
      emit(out_path, out, [&](std::ostream& os) { write_pmf_csv(os, pmf); });
    } else if (*sim_cmd) {
      const SimConfig cfg{parse_theta(theta_text), nu, seed};
      const Histogram hist = method == "direct" ? sample_counts(cfg) : sample_counts_by_inversion(cfg);
      if (out_path.empty()) {
        write_histogram_csv(out, hist);
      } else {
        write_histogram(out_path, hist);
      }
    } else if (*est_cmd) {
      const Histogram hist = read_histogram(hist_path);
      SearchConfig cfg;
      cfg.m = m;
      if (!pool_text.empty()) cfg.pool = parse_pool(pool_text);
      cfg.allow_repeats = !no_repeats;
      cfg.em.max_iter = max_iter;
      cfg.em.tol = tol;
      cfg.top_k_report = top_k;
      cfg.workers = threads;
      const SearchResult result = run_search(hist, cfg);
      if (!table_path.empty()) {
        emit(table_path, out, [&](std::ostream& os) {
          write_ranked_csv(os, result.ranked, m, static_cast<std::size_t>(std::max(0, top_k)));
        });
      }
      emit(out_path, out, [&](std::ostream& os) { write_estimation_json(os, result.best); });
    } else if (*crlb_cmd) {
      const ThetaVec theta = parse_theta(theta_text);
      const FisherMatrix fim = fisher_matrix(theta);
      const CrlbResult bound = crlb(theta, nu_real);
      emit(out_path, out, [&](std::ostream& os) { write_crlb_json(os, theta, fim, bound); });
    } else if (*nu_cmd) {
      const BoundScale scale = parse_scale(scale_text);
      if (!grid_m.empty() || !grid_p.empty()) {
        if (grid_m.empty() || grid_p.empty()) throw DomainError("grid mode needs both --grid-M and --grid-p");
        const PoolRange range = parse_pool(grid_m);
        std::vector<SpeciesParams> fixed;
        if (!fixed_text.empty()) {
          const ThetaVec f = parse_theta(fixed_text);
          fixed.assign(f.begin(), f.end());
        }
        const auto probs = parse_prob_grid(grid_p);
        const auto cells = nu_required_grid(fixed, range.lo, range.hi, probs, target, scale,
                                            param_kind == "M" ? GridParam::Emitters : GridParam::DetectProb,
                                            threads);
        emit(out_path, out, [&](std::ostream& os) { write_nu_grid_csv(os, cells, log10_column); });
      } else {
        if (theta_text.empty() || !param_index) {
          throw DomainError("single-point mode needs --theta and --param");
        }
        const double needed = nu_required(parse_theta(theta_text), *param_index, target, scale);
        emit(out_path, out, [&](std::ostream& os) { os << format_real(needed) << '\n'; });
      }
    } else if (*mc_cmd) {
      McStudyConfig cfg = load_mc_config(config_path);
      if (!out_dir.empty()) cfg.outputs = out_dir;
      if (cfg.outputs.empty()) throw DomainError("no output directory: set 'outputs' or --out-dir");
      const McReport report = run_mc_study(cfg, threads);
      write_mc_report(report, cfg.theta_true.size(), cfg.outputs);
    }
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NoFeasibleCandidate& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace photon_census
