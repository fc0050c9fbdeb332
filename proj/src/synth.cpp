#include "photon_census/synth.hpp"

#include <algorithm>
#include <span>
#include <vector>

#include "photon_census/errors.hpp"
#include "photon_census/parallel.hpp"
#include "photon_census/rng.hpp"

namespace photon_census {

namespace {

constexpr std::uint64_t kSpeciesStream = 0x5350454349455331ULL;
constexpr std::uint64_t kInversionStream = 0x494e564552534931ULL;
constexpr std::uint64_t kBlock = 1 << 16;
constexpr int kBernoulliLimit = 64;

std::vector<double> cumulative(std::span<const double> probs) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  return cdf;
}

// Smallest index whose CDF exceeds u, restricted to bins with positive mass.
std::size_t invert(std::span<const double> cdf, std::span<const double> probs, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t k = (it == cdf.end()) ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
  while (k > 0 && probs[k] == 0.0) --k;
  return k;
}

template <typename Draw>
Histogram accumulate_blocks(const SimConfig& config, std::size_t support, unsigned workers, Draw draw) {
  if (config.num_experiments < 1) throw DomainError("number of experiments must be >= 1");
  const std::uint64_t nu = config.num_experiments;
  const std::size_t blocks = static_cast<std::size_t>((nu + kBlock - 1) / kBlock);
  std::vector<std::vector<std::uint64_t>> partial(blocks);
  parallel_for(blocks, worker_count(workers), [&](std::size_t b) {
    std::vector<std::uint64_t> local(support, 0);
    const std::uint64_t first = b * kBlock;
    const std::uint64_t last = std::min(nu, first + kBlock);
    for (std::uint64_t e = first; e < last; ++e) ++local[draw(e)];
    partial[b] = std::move(local);
  });
  std::vector<std::uint64_t> counts(support, 0);
  for (const auto& local : partial) {
    for (std::size_t i = 0; i < support; ++i) counts[i] += local[i];
  }
  std::size_t last = support - 1;
  while (last > 0 && counts[last] == 0) --last;
  counts.resize(last + 1);
  return Histogram(std::move(counts));
}

}  // namespace

Histogram sample_counts(const SimConfig& config, unsigned workers) {
  const ThetaVec& theta = config.theta;
  struct SpeciesSampler {
    int emitters;
    double p;
    std::vector<double> probs;
    std::vector<double> cdf;
  };
  std::vector<SpeciesSampler> samplers;
  for (const auto& s : theta) {
    SpeciesSampler sampler{s.emitters, s.detect_prob, {}, {}};
    if (s.emitters > kBernoulliLimit) {
      sampler.probs = binomial_table(s.emitters, s.detect_prob);
      sampler.cdf = cumulative(sampler.probs);
    }
    samplers.push_back(std::move(sampler));
  }
  const auto support = static_cast<std::size_t>(theta.total_emitters()) + 1;
  return accumulate_blocks(config, support, workers, [&](std::uint64_t e) {
    CounterRng rng(config.seed, kSpeciesStream, e);
    std::size_t y = 0;
    for (const auto& s : samplers) {
      if (s.emitters <= kBernoulliLimit) {
        for (int k = 0; k < s.emitters; ++k) y += rng.uniform() < s.p ? 1 : 0;
      } else {
        y += invert(s.cdf, s.probs, rng.uniform());
      }
    }
    return y;
  });
}

Histogram sample_counts_by_inversion(const SimConfig& config, unsigned workers) {
  const PmfTable pmf = convolve_pmf(config.theta);
  const std::vector<double> cdf = cumulative(pmf.probs);
  return accumulate_blocks(config, pmf.size(), workers, [&](std::uint64_t e) {
    CounterRng rng(config.seed, kInversionStream, e);
    return invert(cdf, pmf.probs, rng.uniform());
  });
}

}  // namespace photon_census
