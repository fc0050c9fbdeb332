#pragma once

// Moment-seeded candidate search.
//
// Every m-combination of emitter counts from a pool is a candidate. For each
// candidate the first m power-sum equations sum_j M_j p_j^k = S_k are solved
// for p, every real solution inside (0, 1)^m seeds an EM run with the emitter
// counts held fixed, and the candidate with the largest log-likelihood wins.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "photon_census/em.hpp"
#include "photon_census/model.hpp"

namespace photon_census {

struct PoolRange {
  int lo = 1;
  int hi = 1;
};

struct SearchConfig {
  int m = 1;
  std::optional<PoolRange> pool;  // default_pool(hist) when unset
  bool allow_repeats = true;
  EmOptions em;                   // fix_M is forced on during the search
  int top_k_report = 5;
  unsigned workers = 1;
};

struct CandidateSet {
  std::vector<std::vector<int>> combos;  // each nondecreasing; lexicographic order

  std::size_t size() const { return combos.size(); }
};

struct CandidateRow {
  std::vector<int> combo;  // candidate emitter counts as enumerated
  std::optional<ThetaVec> theta;  // EM-refined estimate, canonical order; empty if infeasible
  double log_lik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t candidate_index = 0;
  std::size_t solution_index = 0;
};

struct SearchResult {
  EstimationResult best;
  std::vector<CandidateRow> ranked;  // descending log-likelihood, ties by (candidate, solution)
  PoolRange pool;
  std::size_t candidates = 0;
};

// mu1 = sum_i (C_i / nu) i and mu_k = sum_i (C_i / nu) (i - mu1)^k.
MomentSet sample_moments(const Histogram& hist);

// Pool [1, max(N, 4 * ceil(mu1 + 6 sqrt(mu2)))].
PoolRange default_pool(const Histogram& hist);

CandidateSet enumerate_candidates(int m, PoolRange pool, bool allow_repeats);
CandidateSet enumerate_candidates(const SearchConfig& config, PoolRange pool);

// Real roots of c[0] + c[1] x + ... + c[d] x^d from companion-matrix
// eigenvalues, polished by Newton steps. Roots whose imaginary part is not
// negligible are dropped.
std::vector<double> real_polynomial_roots(std::span<const double> coeffs);

// Real solutions p in (0, 1)^m of sum_j Ms[j] p_j^k = S_k, k = 1..m, where
// S_k comes from the moments. Ms must be nondecreasing and m <= 4. Solutions
// are deduplicated up to exchanges among equal Ms and aligned with Ms. An
// empty result means the candidate has no admissible moment solution.
//
// m = 1 is closed form, m = 2 reduces to a univariate polynomial in p_1, and
// m >= 3 runs damped Newton from a 5^m grid of starts.
std::vector<std::vector<double>> solve_power_sums(std::span<const int> Ms, const MomentSet& moments);

// Refines every moment solution for one candidate with fixed-M EM. A
// candidate whose total emitter count is below the largest observed count, or
// whose EM run fails, is scored -inf.
std::vector<CandidateRow> evaluate_candidate(const Histogram& hist, std::span<const int> combo,
                                             const MomentSet& moments, const EmOptions& em,
                                             std::size_t candidate_index = 0);

// Throws NoFeasibleCandidate when no candidate reaches a finite likelihood.
SearchResult run_search(const Histogram& hist, const SearchConfig& config);

}  // namespace photon_census
