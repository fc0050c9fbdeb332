#pragma once

// Expectation-maximization for the convolution-of-binomials model.
//
// The E-step needs, for every observed total i, the posterior of how many of
// the i photons came from each species. Rather than enumerating the
// compositions of i, each species' marginal is formed from its binomial mass
// and the leave-one-out convolution of the other species:
//
//   q[j][i][y] = Bin(y; M_j, p_j) * pr_{-j}(i - y) / pr(i).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "photon_census/model.hpp"

namespace photon_census {

class PosteriorMarginals {
 public:
  PosteriorMarginals() = default;
  PosteriorMarginals(std::vector<int> emitters, std::size_t max_count);

  std::size_t species() const { return emitters_.size(); }
  std::size_t max_count() const { return max_count_; }
  int emitters(std::size_t j) const { return emitters_[j]; }

  // q[j][i][y]; zero outside 0 <= y <= min(i, M_j).
  double operator()(std::size_t j, std::size_t i, int y) const;
  double& at(std::size_t j, std::size_t i, int y);

  // E[Y_j | Y = i].
  double expected(std::size_t j, std::size_t i) const;

  // W_j[y] = sum_i C_i q[j][i][y]: expected number of experiments in which
  // species j contributed exactly y photons.
  std::vector<double> weighted_counts(const Histogram& hist, std::size_t j) const;

 private:
  std::vector<int> emitters_;
  std::size_t max_count_ = 0;
  std::vector<std::vector<double>> table_;  // per species, (N+1) x (M_j+1) row-major
};

struct EmitterRange {
  int lo = 1;
  int hi = 1;
};

// How the integer emitter counts are refreshed in a full EM step.
enum class MStep {
  // For every candidate M_j, p_j is set to its Q-maximizer E_j / (M_j nu) and
  // the pair with the largest Q_j is kept: the exact argmax of Q_j over
  // (M_j, p_j).
  Profile,
  // p_j from the previous M_j, then M_j scanned at that fixed p_j.
  Sequential,
};

struct EmOptions {
  bool fix_M = false;
  int max_iter = 1000;
  // Stop when |delta log-likelihood| < tol * max(1, |log-likelihood|).
  double tol = 1e-10;
  // Upper end of the M scan; defaults to 4 * ceil(mu1 + 6 sqrt(mu2)) from
  // the sample moments.
  std::optional<int> M_upper;
  MStep m_step = MStep::Profile;
};

struct EmState {
  ThetaVec theta_hat;
  double log_lik = 0.0;
  int iteration = 0;
  bool converged = false;
  std::vector<double> trace;  // log-likelihood before the first step and after each step
};

struct EstimationResult {
  ThetaVec theta;
  double log_lik = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kProbClamp = 1e-12;

// sum_i C_i ln pr(Y = i | theta); -inf when a positive count has zero
// probability (for example, a count above sum M_j).
double log_likelihood(const Histogram& hist, const ThetaVec& theta);

// Throws InfeasibleError when a positive count has zero probability.
PosteriorMarginals posterior_marginals(const Histogram& hist, const ThetaVec& theta);

// p_j = sum_i C_i E[Y_j | i] / (M_j nu), clamped to [1e-12, 1 - 1e-12].
std::vector<double> em_update_p(const Histogram& hist, const PosteriorMarginals& post,
                                std::span<const int> emitters);

// Exhaustive scan of Q_j(M) = sum_y W_j[y] ln Bin(y; M, p_j) over ranges[j];
// ties go to the smaller M.
std::vector<int> em_update_M(const Histogram& hist, const PosteriorMarginals& post,
                             std::span<const double> p_new, std::span<const EmitterRange> ranges);

struct SpeciesUpdate {
  std::vector<int> emitters;
  std::vector<double> detect_probs;
};

// Joint maximization of Q_j over (M_j, p_j), M_j restricted to ranges[j].
SpeciesUpdate em_update_profile(const Histogram& hist, const PosteriorMarginals& post,
                                std::span<const EmitterRange> ranges);

// Default upper end of the emitter scan for a histogram.
int default_emitter_upper(const Histogram& hist);

EmState run_em(const Histogram& hist, const ThetaVec& theta_init, const EmOptions& options = {});

}  // namespace photon_census
