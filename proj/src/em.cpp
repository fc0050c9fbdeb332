#include "photon_census/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "photon_census/errors.hpp"
#include "photon_census/search.hpp"
#include "photon_census/special.hpp"

namespace photon_census {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// Q_j(M, p) = sum_y W[y] ln Bin(y; M, p).
double species_q(std::span<const double> weights, int emitters, double p) {
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_m_fact = log_gamma(emitters + 1.0);
  double total = 0.0;
  for (std::size_t y = 0; y < weights.size(); ++y) {
    if (weights[y] == 0.0) continue;
    const int yi = static_cast<int>(y);
    if (yi > emitters) return kNegInf;
    double log_mass = log_m_fact - log_gamma(yi + 1.0) - log_gamma(emitters - yi + 1.0);
    if (yi > 0) log_mass += (p > 0.0) ? yi * log_p : kNegInf;
    if (emitters > yi) log_mass += (p < 1.0) ? (emitters - yi) * log_q : kNegInf;
    total += weights[y] * log_mass;
  }
  return total;
}

int support_floor(std::span<const double> weights) {
  int lo = 1;
  for (std::size_t y = weights.size(); y-- > 0;) {
    if (weights[y] > 0.0) {
      lo = std::max(lo, static_cast<int>(y));
      break;
    }
  }
  return lo;
}

void check_ranges(std::span<const EmitterRange> ranges, std::size_t m) {
  if (ranges.size() != m) throw DomainError("one emitter range per species required");
  for (const auto& r : ranges) {
    if (r.lo < 1 || r.hi < r.lo) throw DomainError("empty emitter range");
  }
}

}  // namespace

PosteriorMarginals::PosteriorMarginals(std::vector<int> emitters, std::size_t max_count)
    : emitters_(std::move(emitters)), max_count_(max_count) {
  table_.resize(emitters_.size());
  for (std::size_t j = 0; j < emitters_.size(); ++j) {
    table_[j].assign((max_count_ + 1) * (static_cast<std::size_t>(emitters_[j]) + 1), 0.0);
  }
}

double PosteriorMarginals::operator()(std::size_t j, std::size_t i, int y) const {
  if (i > max_count_ || y < 0 || y > emitters_[j]) return 0.0;
  return table_[j][i * (emitters_[j] + 1) + y];
}

double& PosteriorMarginals::at(std::size_t j, std::size_t i, int y) {
  return table_[j][i * (emitters_[j] + 1) + y];
}

double PosteriorMarginals::expected(std::size_t j, std::size_t i) const {
  if (i > max_count_) return 0.0;
  const int width = emitters_[j] + 1;
  const double* row = table_[j].data() + i * width;
  double e = 0.0;
  for (int y = 1; y < width; ++y) e += y * row[y];
  return e;
}

std::vector<double> PosteriorMarginals::weighted_counts(const Histogram& hist, std::size_t j) const {
  const int width = emitters_[j] + 1;
  std::vector<double> w(width, 0.0);
  const std::size_t rows = std::min(max_count_, hist.max_count());
  for (std::size_t i = 0; i <= rows; ++i) {
    const auto c = static_cast<double>(hist[i]);
    if (c == 0.0) continue;
    const double* row = table_[j].data() + i * width;
    for (int y = 0; y < width; ++y) w[y] += c * row[y];
  }
  return w;
}

double log_likelihood(const Histogram& hist, const ThetaVec& theta) {
  const PmfTable pmf = convolve_pmf(theta);
  double total = 0.0;
  const auto counts = hist.counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const double pr = pmf[i];
    if (!(pr > 0.0)) return kNegInf;
    total += static_cast<double>(counts[i]) * std::log(pr);
  }
  return total;
}

PosteriorMarginals posterior_marginals(const Histogram& hist, const ThetaVec& theta) {
  const std::size_t m = theta.size();
  const std::size_t n_max = hist.max_count();
  std::vector<std::vector<double>> tables(m);
  for (std::size_t j = 0; j < m; ++j) tables[j] = binomial_table(theta[j].emitters, theta[j].detect_prob);
  const auto loo = leave_one_out(tables);

  PosteriorMarginals post(theta.emitters(), n_max);
  for (std::size_t i = 0; i <= n_max; ++i) {
    const bool observed = hist[i] > 0;
    for (std::size_t j = 0; j < m; ++j) {
      const int cap = theta[j].emitters;
      const auto& others = loo[j];
      const int y_lo = std::max<int>(0, static_cast<int>(i) - static_cast<int>(others.size()) + 1);
      const int y_hi = std::min<int>(cap, static_cast<int>(i));
      double norm = 0.0;
      for (int y = y_lo; y <= y_hi; ++y) {
        const double w = tables[j][y] * others[i - y];
        post.at(j, i, y) = w;
        norm += w;
      }
      if (!(norm > 0.0)) {
        if (observed) {
          throw InfeasibleError("photon count " + std::to_string(i) +
                                " has zero probability under the current parameters");
        }
        for (int y = y_lo; y <= y_hi; ++y) post.at(j, i, y) = 0.0;
        continue;
      }
      for (int y = y_lo; y <= y_hi; ++y) post.at(j, i, y) /= norm;
    }
  }
  return post;
}

std::vector<double> em_update_p(const Histogram& hist, const PosteriorMarginals& post,
                                std::span<const int> emitters) {
  if (emitters.size() != post.species()) throw DomainError("one emitter count per species required");
  const double nu = static_cast<double>(hist.nu());
  std::vector<double> p(emitters.size());
  for (std::size_t j = 0; j < emitters.size(); ++j) {
    if (emitters[j] < 1) throw DomainError("emitter count must be >= 1");
    double photons = 0.0;
    const std::size_t rows = std::min(post.max_count(), hist.max_count());
    for (std::size_t i = 0; i <= rows; ++i) {
      if (hist[i] > 0) photons += static_cast<double>(hist[i]) * post.expected(j, i);
    }
    p[j] = clamp_prob(photons / (emitters[j] * nu));
  }
  return p;
}

std::vector<int> em_update_M(const Histogram& hist, const PosteriorMarginals& post,
                             std::span<const double> p_new, std::span<const EmitterRange> ranges) {
  check_ranges(ranges, post.species());
  std::vector<int> out(post.species());
  for (std::size_t j = 0; j < post.species(); ++j) {
    const auto w = post.weighted_counts(hist, j);
    int best_m = ranges[j].lo;
    double best_q = kNegInf;
    for (int cand = ranges[j].lo; cand <= ranges[j].hi; ++cand) {
      const double q = species_q(w, cand, p_new[j]);
      if (q > best_q) {
        best_q = q;
        best_m = cand;
      }
    }
    out[j] = best_m;
  }
  return out;
}

SpeciesUpdate em_update_profile(const Histogram& hist, const PosteriorMarginals& post,
                                std::span<const EmitterRange> ranges) {
  check_ranges(ranges, post.species());
  const double nu = static_cast<double>(hist.nu());
  SpeciesUpdate out{std::vector<int>(post.species()), std::vector<double>(post.species())};
  for (std::size_t j = 0; j < post.species(); ++j) {
    const auto w = post.weighted_counts(hist, j);
    double photons = 0.0;
    for (std::size_t y = 1; y < w.size(); ++y) photons += static_cast<double>(y) * w[y];
    int best_m = ranges[j].lo;
    double best_p = clamp_prob(photons / (best_m * nu));
    double best_q = kNegInf;
    for (int cand = ranges[j].lo; cand <= ranges[j].hi; ++cand) {
      const double p = clamp_prob(photons / (cand * nu));
      const double q = species_q(w, cand, p);
      if (q > best_q) {
        best_q = q;
        best_m = cand;
        best_p = p;
      }
    }
    out.emitters[j] = best_m;
    out.detect_probs[j] = best_p;
  }
  return out;
}

int default_emitter_upper(const Histogram& hist) {
  const MomentSet mom = sample_moments(hist);
  const double reach = std::ceil(mom.mu1 + 6.0 * std::sqrt(std::max(0.0, mom.mu2)));
  return std::max({1, static_cast<int>(hist.max_observed()), 4 * static_cast<int>(reach)});
}

EmState run_em(const Histogram& hist, const ThetaVec& theta_init, const EmOptions& options) {
  if (!theta_init.interior()) {
    throw DomainError("EM requires every detection probability strictly inside (0, 1)");
  }
  EmState state{theta_init, log_likelihood(hist, theta_init), 0, false, {}};
  if (!std::isfinite(state.log_lik)) {
    throw InfeasibleError("initial parameters cannot produce the observed counts (max observed " +
                          std::to_string(hist.max_observed()) + ", total emitters " +
                          std::to_string(theta_init.total_emitters()) + ")");
  }
  state.trace.push_back(state.log_lik);
  const int upper = options.M_upper.value_or(default_emitter_upper(hist));

  for (int it = 1; it <= options.max_iter; ++it) {
    const auto post = posterior_marginals(hist, state.theta_hat);
    std::vector<int> emitters = state.theta_hat.emitters();
    std::vector<double> probs;
    if (options.fix_M) {
      probs = em_update_p(hist, post, emitters);
    } else {
      std::vector<EmitterRange> ranges(emitters.size());
      for (std::size_t j = 0; j < emitters.size(); ++j) {
        const int lo = support_floor(post.weighted_counts(hist, j));
        ranges[j] = {lo, std::max({upper, emitters[j], lo})};
      }
      if (options.m_step == MStep::Profile) {
        auto update = em_update_profile(hist, post, ranges);
        emitters = std::move(update.emitters);
        probs = std::move(update.detect_probs);
      } else {
        probs = em_update_p(hist, post, emitters);
        emitters = em_update_M(hist, post, probs, ranges);
      }
    }
    ThetaVec next(emitters, probs);
    const double ll = log_likelihood(hist, next);
    if (!std::isfinite(ll)) {
      throw NumericalError("log-likelihood became non-finite at EM iteration " + std::to_string(it));
    }
    const double delta = ll - state.log_lik;
    state.theta_hat = std::move(next);
    state.log_lik = ll;
    state.iteration = it;
    state.trace.push_back(ll);
    if (std::abs(delta) < options.tol * std::max(1.0, std::abs(ll))) {
      state.converged = true;
      break;
    }
  }
  return state;
}

}  // namespace photon_census
