#pragma once

// Convolution-of-binomials photon count model.
//
// A pulse excites m independent species; species j holds M_j emitters each
// detected with probability p_j, so the detected photon number is
// Y = sum_j Y_j with Y_j ~ Binomial(M_j, p_j).

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace photon_census {

struct SpeciesParams {
  int emitters = 1;
  double detect_prob = 0.0;

  friend bool operator==(const SpeciesParams&, const SpeciesParams&) = default;
};

// Ordered parameter vector. Species are kept sorted ascending by detection
// probability, ties by emitter count, which fixes the labeling of the
// permutation-symmetric model.
class ThetaVec {
 public:
  explicit ThetaVec(std::vector<SpeciesParams> species);
  ThetaVec(std::span<const int> emitters, std::span<const double> detect_probs);

  std::size_t size() const { return species_.size(); }
  const SpeciesParams& operator[](std::size_t j) const { return species_[j]; }
  std::span<const SpeciesParams> species() const { return species_; }
  auto begin() const { return species_.begin(); }
  auto end() const { return species_.end(); }

  int total_emitters() const;
  std::vector<int> emitters() const;
  std::vector<double> detect_probs() const;

  // True when every p_j lies strictly inside (0, 1).
  bool interior() const;

  friend bool operator==(const ThetaVec&, const ThetaVec&) = default;

 private:
  std::vector<SpeciesParams> species_;
};

// Occurrence counts C_0..C_N of observed photon numbers.
class Histogram {
 public:
  explicit Histogram(std::vector<std::uint64_t> counts);

  std::span<const std::uint64_t> counts() const { return counts_; }
  std::uint64_t operator[](std::size_t i) const { return i < counts_.size() ? counts_[i] : 0; }
  // N: index of the last stored entry (may be a padded zero).
  std::size_t max_count() const { return counts_.size() - 1; }
  // Largest photon number with a nonzero count.
  std::size_t max_observed() const;
  std::uint64_t nu() const { return nu_; }

  friend bool operator==(const Histogram&, const Histogram&) = default;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t nu_ = 0;
};

struct PmfTable {
  std::vector<double> probs;  // index y = 0..sum M_j

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t y) const { return y < probs.size() ? probs[y] : 0.0; }
};

// Mean and 2nd..4th central moments.
struct MomentSet {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  double mu4 = 0.0;
};

// S_k = sum_j M_j p_j^k for k = 1..4 (index 0 holds S_1).
using PowerSums = std::array<double, 4>;

double log_binomial_pmf(int y, double emitters, double p);
double binomial_pmf(int y, int emitters, double p);

// Binomial(M, p) mass over y = 0..M, evaluated in log space.
std::vector<double> binomial_table(int emitters, double p);

// Linear discrete convolution of two mass (or signed) sequences.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

PmfTable convolve_pmf(const ThetaVec& theta);

// For each j, the convolution of every table except tables[j], built from
// prefix and suffix products (no deconvolution).
std::vector<std::vector<double>> leave_one_out(const std::vector<std::vector<double>>& tables);

// All (y_1..y_m) with sum i and 0 <= y_j <= caps[j], in lexicographic order.
std::vector<std::vector<int>> enumerate_partitions(int total, std::span<const int> caps);

// Direct sum over partitions of the product of binomial masses. Exponential in
// m; kept as a reference for the convolution route.
double pmf_via_partitions(const ThetaVec& theta, int y);

struct GaussianApprox {
  double mean = 0.0;
  double variance = 0.0;
};

GaussianApprox gaussian_approx(const ThetaVec& theta);

// Population mean and central moments of Y. The fourth central moment of a
// sum is built from cumulants, kappa_4 + 3 kappa_2^2; it reduces to the
// single-binomial expression when m = 1.
MomentSet population_moments(const ThetaVec& theta);

PowerSums power_sums_from_moments(const MomentSet& moments);

// sum_j M_j p_j^k computed directly from theta.
PowerSums power_sums(const ThetaVec& theta);

}  // namespace photon_census
