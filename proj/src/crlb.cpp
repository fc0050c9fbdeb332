#include "photon_census/crlb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "photon_census/errors.hpp"
#include "photon_census/parallel.hpp"
#include "photon_census/special.hpp"

namespace photon_census {

namespace {

void require_interior(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw SingularInputError("derivative of the binomial mass requires 0 < p < 1");
  }
}

}  // namespace

double d_pmf_dM(int y, double emitters, double p) {
  require_interior(p);
  if (y < 0 || static_cast<double>(y) > emitters) {
    throw DomainError("d_pmf_dM requires 0 <= y <= M");
  }
  const double mass = std::exp(log_binomial_pmf(y, emitters, p));
  return mass * (digamma(emitters + 1.0) - digamma(emitters - y + 1.0) + std::log1p(-p));
}

double d_pmf_dp(int y, int emitters, double p) {
  require_interior(p);
  if (y < 0 || y > emitters) throw DomainError("d_pmf_dp requires 0 <= y <= M");
  const double mass = std::exp(log_binomial_pmf(y, emitters, p));
  return -mass * (emitters * p - y) / (p * (1.0 - p));
}

FisherMatrix fisher_matrix(const ThetaVec& theta) {
  const std::size_t m = theta.size();
  std::vector<std::vector<double>> mass(m), dM(m), dp(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto [cap, p] = theta[j];
    require_interior(p);
    mass[j] = binomial_table(cap, p);
    dM[j].resize(cap + 1);
    dp[j].resize(cap + 1);
    for (int y = 0; y <= cap; ++y) {
      dM[j][y] = d_pmf_dM(y, cap, p);
      dp[j][y] = d_pmf_dp(y, cap, p);
    }
  }
  const PmfTable pmf = convolve_pmf(theta);
  const auto loo = leave_one_out(mass);

  // gradient of pr(Y = i) with respect to each parameter
  const auto n_total = static_cast<Eigen::Index>(pmf.size());
  const auto dim = static_cast<Eigen::Index>(2 * m);
  Eigen::MatrixXd grad(dim, n_total);
  for (std::size_t j = 0; j < m; ++j) {
    const auto gm = convolve(dM[j], loo[j]);
    const auto gp = convolve(dp[j], loo[j]);
    for (Eigen::Index i = 0; i < n_total; ++i) {
      grad(2 * j, i) = gm[i];
      grad(2 * j + 1, i) = gp[i];
    }
  }
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n_total; ++i) {
    const double pr = pmf.probs[i];
    if (!(pr > 0.0)) continue;
    info.selfadjointView<Eigen::Upper>().rankUpdate(grad.col(i), 1.0 / pr);
  }
  info.triangularView<Eigen::StrictlyLower>() = info.transpose();
  return FisherMatrix{std::move(info)};
}

CrlbResult crlb(const ThetaVec& theta, double nu) {
  if (!(nu > 0.0)) throw DomainError("number of experiments must be positive");
  const FisherMatrix fim = fisher_matrix(theta);
  CrlbResult out;
  out.nu = nu;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(fim.entries);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  out.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  out.singular = !std::isfinite(out.condition_number) || out.condition_number > kSingularCondition;
  if (out.singular) return out;
  out.covariance_bound = fim.entries.ldlt().solve(Eigen::MatrixXd::Identity(fim.dim(), fim.dim())) / nu;
  out.covariance_bound = 0.5 * (out.covariance_bound + out.covariance_bound.transpose()).eval();
  out.per_parameter_std.resize(static_cast<std::size_t>(fim.dim()));
  for (Eigen::Index k = 0; k < fim.dim(); ++k) {
    out.per_parameter_std[k] = std::sqrt(std::max(0.0, out.covariance_bound(k, k)));
  }
  return out;
}

double nu_required(const ThetaVec& theta, std::size_t param_index, double target_fraction, BoundScale scale) {
  if (!(target_fraction > 0.0)) throw DomainError("target fraction must be positive");
  if (param_index >= 2 * theta.size()) throw DomainError("parameter index out of range");
  const CrlbResult bound = crlb(theta, 1.0);
  if (bound.singular) {
    throw NumericalError("Fisher information is singular: no finite number of experiments");
  }
  const auto& sp = theta[param_index / 2];
  const double value = (param_index % 2 == 0) ? sp.emitters : sp.detect_prob;
  const auto k = static_cast<Eigen::Index>(param_index);
  const double variance = bound.covariance_bound(k, k);
  const double scaled = target_fraction * value;
  const double nu = scale == BoundScale::StdDev ? variance / (scaled * scaled) : variance / scaled;
  return std::ceil(nu);
}

std::vector<NuGridCell> nu_required_grid(std::span<const SpeciesParams> fixed, int emitters_lo,
                                         int emitters_hi, std::span<const double> probs,
                                         double target_fraction, BoundScale scale, GridParam param,
                                         unsigned workers) {
  if (emitters_lo < 1 || emitters_hi < emitters_lo) throw DomainError("empty emitter range for grid");
  const std::size_t n_m = static_cast<std::size_t>(emitters_hi - emitters_lo + 1);
  std::vector<NuGridCell> cells(n_m * probs.size());
  parallel_for(cells.size(), worker_count(workers), [&](std::size_t c) {
    const int cap = emitters_lo + static_cast<int>(c / probs.size());
    const double p = probs[c % probs.size()];
    std::vector<SpeciesParams> species(fixed.begin(), fixed.end());
    species.push_back({cap, p});
    const ThetaVec theta(std::move(species));
    std::size_t idx = 0;
    while (!(theta[idx] == SpeciesParams{cap, p})) ++idx;
    const std::size_t k = 2 * idx + (param == GridParam::Emitters ? 0 : 1);
    double nu = std::numeric_limits<double>::infinity();
    try {
      nu = nu_required(theta, k, target_fraction, scale);
    } catch (const NumericalError&) {
      // singular cell
    }
    cells[c] = {cap, p, nu};
  });
  return cells;
}

}  // namespace photon_census
