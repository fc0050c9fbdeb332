#pragma once

// Fisher information of the observed photon-number distribution and the
// approximate Cramer-Rao bound that follows from treating the emitter counts
// as continuous through the Gamma function.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "photon_census/model.hpp"

namespace photon_census {

// d/dM of the Gamma-continued binomial mass,
//   Bin(y; M, p) [psi(M + 1) - psi(M - y + 1) + ln(1 - p)].
// Finite for every M >= y including the support edge y = M.
double d_pmf_dM(int y, double emitters, double p);

// d/dp of Bin(y; M, p) = -C(M, y) p^(y-1) (1-p)^(M-y-1) (M p - y).
double d_pmf_dp(int y, int emitters, double p);

// 2m x 2m information matrix in the parameter order [M_1, p_1, ..., M_m, p_m]
// (canonical species order).
struct FisherMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index dim() const { return entries.rows(); }
};

FisherMatrix fisher_matrix(const ThetaVec& theta);

inline constexpr double kSingularCondition = 1e12;

struct CrlbResult {
  Eigen::MatrixXd covariance_bound;  // empty when singular
  std::vector<double> per_parameter_std;
  double nu = 1.0;
  bool singular = false;
  double condition_number = 0.0;
};

// inverse(FIM) / nu; singular when the 2-norm condition number exceeds 1e12.
CrlbResult crlb(const ThetaVec& theta, double nu);

// Whether the relative-accuracy target is read on the standard-deviation
// scale, sqrt(C_nu[k][k]) / theta_k, or the variance scale, C_nu[k][k] / theta_k.
enum class BoundScale { StdDev, Variance };

// Smallest nu with the bound on parameter `param_index` (order as in
// FisherMatrix) at most target_fraction relative to its true value. Throws
// NumericalError when the information matrix is singular.
double nu_required(const ThetaVec& theta, std::size_t param_index, double target_fraction,
                   BoundScale scale = BoundScale::StdDev);

enum class GridParam { Emitters, DetectProb };

struct NuGridCell {
  int emitters = 0;
  double detect_prob = 0.0;
  double nu_exp = 0.0;  // +inf where the information matrix is singular
};

// nu_required for a species (M, p) swept over a grid, added to `fixed`
// species. The bound is taken on the swept species' M (or p).
std::vector<NuGridCell> nu_required_grid(std::span<const SpeciesParams> fixed, int emitters_lo,
                                         int emitters_hi, std::span<const double> probs,
                                         double target_fraction, BoundScale scale = BoundScale::StdDev,
                                         GridParam param = GridParam::Emitters, unsigned workers = 1);

}  // namespace photon_census
