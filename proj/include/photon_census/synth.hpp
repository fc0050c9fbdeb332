#pragma once

#include <cstdint>

#include "photon_census/model.hpp"

namespace photon_census {

struct SimConfig {
  ThetaVec theta;
  std::uint64_t num_experiments = 1;
  std::uint64_t seed = 0;
};

// Per experiment, draws Y_j ~ Binomial(M_j, p_j) for each species and records
// Y = sum_j Y_j. Species with M_j <= 64 use M_j Bernoulli trials, larger ones
// invert the binomial CDF. The result is trimmed so N is the largest observed
// count and is identical for any worker count.
Histogram sample_counts(const SimConfig& config, unsigned workers = 0);

// Draws the total count directly from the convolution PMF by inverse-CDF
// sampling. Same distribution as sample_counts, independent code path.
Histogram sample_counts_by_inversion(const SimConfig& config, unsigned workers = 0);

}  // namespace photon_census
