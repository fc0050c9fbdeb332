#include "photon_census/search.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "photon_census/errors.hpp"
#include "photon_census/parallel.hpp"

namespace photon_census {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr double kDedupeRadius = 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd power_residual(std::span<const int> Ms, const Eigen::VectorXd& p, const PowerSums& s) {
  const auto m = static_cast<Eigen::Index>(Ms.size());
  Eigen::VectorXd r(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) acc += Ms[j] * std::pow(p[j], static_cast<double>(k + 1));
    r[k] = acc - s[k];
  }
  return r;
}

Eigen::MatrixXd power_jacobian(std::span<const int> Ms, const Eigen::VectorXd& p) {
  const auto m = static_cast<Eigen::Index>(Ms.size());
  Eigen::MatrixXd jac(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < m; ++j) {
      jac(k, j) = (k + 1) * Ms[j] * (k == 0 ? 1.0 : std::pow(p[j], static_cast<double>(k)));
    }
  }
  return jac;
}

double residual_scale(const PowerSums& s) { return std::max(1.0, std::abs(s[0])); }

// Damped Newton on the first m power-sum equations. Returns the root when the
// residual drops below tolerance.
std::optional<Eigen::VectorXd> newton_power_sums(std::span<const int> Ms, const PowerSums& s,
                                                 Eigen::VectorXd p) {
  const double tol = kResidualTol * residual_scale(s);
  double norm = power_residual(Ms, p, s).lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < 100; ++iter) {
    if (norm < tol) {
      // two undamped polishing steps
      for (int extra = 0; extra < 2; ++extra) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(power_jacobian(Ms, p));
        if (!lu.isInvertible()) break;
        const Eigen::VectorXd cand = p - lu.solve(power_residual(Ms, p, s));
        if (power_residual(Ms, cand, s).lpNorm<Eigen::Infinity>() <= norm) {
          p = cand;
          norm = power_residual(Ms, p, s).lpNorm<Eigen::Infinity>();
        }
      }
      return p;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(power_jacobian(Ms, p));
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::VectorXd step = -lu.solve(power_residual(Ms, p, s));
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-10) {
      const Eigen::VectorXd cand = p + t * step;
      const double cand_norm = power_residual(Ms, cand, s).lpNorm<Eigen::Infinity>();
      if (std::isfinite(cand_norm) && cand_norm < (1.0 - 1e-4 * t) * norm) {
        p = cand;
        norm = cand_norm;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return std::nullopt;
    if (p.cwiseAbs().maxCoeff() > 10.0) return std::nullopt;
  }
  return std::nullopt;
}

bool inside_unit_box(const std::vector<double>& p) {
  return std::all_of(p.begin(), p.end(), [](double v) { return v > 0.0 && v < 1.0; });
}

// Sorts p within runs of equal emitter counts so exchangeable solutions
// compare equal.
void canonicalize_within_ties(std::span<const int> Ms, std::vector<double>& p) {
  std::size_t start = 0;
  while (start < Ms.size()) {
    std::size_t end = start + 1;
    while (end < Ms.size() && Ms[end] == Ms[start]) ++end;
    std::sort(p.begin() + static_cast<std::ptrdiff_t>(start), p.begin() + static_cast<std::ptrdiff_t>(end));
    start = end;
  }
}

void push_unique(std::vector<std::vector<double>>& out, std::vector<double> p) {
  for (const auto& existing : out) {
    double dist = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dist = std::max(dist, std::abs(existing[j] - p[j]));
    if (dist < kDedupeRadius) return;
  }
  out.push_back(std::move(p));
}

}  // namespace

MomentSet sample_moments(const Histogram& hist) {
  const auto counts = hist.counts();
  const double nu = static_cast<double>(hist.nu());
  MomentSet mom;
  for (std::size_t i = 0; i < counts.size(); ++i) mom.mu1 += static_cast<double>(counts[i]) / nu * i;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const double w = static_cast<double>(counts[i]) / nu;
    const double d = static_cast<double>(i) - mom.mu1;
    const double d2 = d * d;
    mom.mu2 += w * d2;
    mom.mu3 += w * d2 * d;
    mom.mu4 += w * d2 * d2;
  }
  return mom;
}

PoolRange default_pool(const Histogram& hist) {
  const MomentSet mom = sample_moments(hist);
  const int reach = static_cast<int>(std::ceil(mom.mu1 + 6.0 * std::sqrt(std::max(0.0, mom.mu2))));
  return {1, std::max({1, static_cast<int>(hist.max_observed()), 4 * reach})};
}

CandidateSet enumerate_candidates(int m, PoolRange pool, bool allow_repeats) {
  if (m < 1) throw DomainError("species count m must be >= 1");
  if (pool.lo < 1 || pool.hi < pool.lo) throw DomainError("candidate pool must be a nonempty range of positive integers");
  CandidateSet set;
  const int width = pool.hi - pool.lo + 1;
  if (!allow_repeats && m > width) {
    throw DomainError("configuration error: m exceeds the pool size without repeats");
  }
  std::vector<int> combo(m, pool.lo);
  if (!allow_repeats) {
    for (int j = 0; j < m; ++j) combo[j] = pool.lo + j;
  }
  while (true) {
    set.combos.push_back(combo);
    // advance to the next tuple in lexicographic order
    int j = m - 1;
    while (j >= 0) {
      const int limit = allow_repeats ? pool.hi : pool.hi - (m - 1 - j);
      if (combo[j] < limit) break;
      --j;
    }
    if (j < 0) break;
    ++combo[j];
    for (int k = j + 1; k < m; ++k) combo[k] = allow_repeats ? combo[j] : combo[k - 1] + 1;
  }
  if (set.combos.empty()) throw DomainError("configuration error: no candidate combinations");
  return set;
}

CandidateSet enumerate_candidates(const SearchConfig& config, PoolRange pool) {
  return enumerate_candidates(config.m, pool, config.allow_repeats);
}

std::vector<double> real_polynomial_roots(std::span<const double> coeffs) {
  std::size_t degree = coeffs.size();
  while (degree > 0 && coeffs[degree - 1] == 0.0) --degree;
  if (degree <= 1) return {};
  --degree;  // index of the leading coefficient
  const double lead = coeffs[degree];
  std::vector<double> roots;
  if (degree == 1) {
    roots.push_back(-coeffs[0] / lead);
    return roots;
  }
  const auto d = static_cast<Eigen::Index>(degree);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index k = 1; k < d; ++k) companion(k, k - 1) = 1.0;
  for (Eigen::Index k = 0; k < d; ++k) companion(k, d - 1) = -coeffs[k] / lead;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto eig = solver.eigenvalues();

  auto eval = [&](double x) {
    double v = 0.0, dv = 0.0;
    for (std::size_t k = degree + 1; k-- > 0;) {
      dv = dv * x + v;
      v = v * x + coeffs[k];
    }
    return std::pair{v, dv};
  };
  for (Eigen::Index k = 0; k < d; ++k) {
    const std::complex<double> z = eig[k];
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z))) continue;
    double x = z.real();
    for (int iter = 0; iter < 8; ++iter) {
      const auto [v, dv] = eval(x);
      if (dv == 0.0) break;
      const double next = x - v / dv;
      if (std::abs(eval(next).first) >= std::abs(v)) break;
      x = next;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<std::vector<double>> solve_power_sums(std::span<const int> Ms, const MomentSet& moments) {
  const std::size_t m = Ms.size();
  if (m < 1 || m > 4) throw DomainError("power-sum solver supports 1 <= m <= 4");
  for (std::size_t j = 0; j < m; ++j) {
    if (Ms[j] < 1) throw DomainError("emitter counts must be >= 1");
    if (j > 0 && Ms[j] < Ms[j - 1]) throw DomainError("emitter counts must be nondecreasing");
  }
  const PowerSums s = power_sums_from_moments(moments);
  std::vector<std::vector<double>> raw;

  if (m == 1) {
    raw.push_back({s[0] / Ms[0]});
  } else if (m == 2) {
    // Substituting p2 = (S1 - M1 p1) / M2 into the second equation:
    // (M1 M2 + M1^2) p1^2 - 2 S1 M1 p1 + (S1^2 - M2 S2) = 0
    const double m1 = Ms[0], m2 = Ms[1];
    const std::array<double, 3> coeffs{s[0] * s[0] - m2 * s[1], -2.0 * s[0] * m1, m1 * m2 + m1 * m1};
    for (double p1 : real_polynomial_roots(coeffs)) {
      Eigen::VectorXd p(2);
      p << p1, (s[0] - m1 * p1) / m2;
      if (auto polished = newton_power_sums(Ms, s, p)) p = *polished;
      if (power_residual(Ms, p, s).lpNorm<Eigen::Infinity>() > kResidualTol * residual_scale(s) * 1e3) continue;
      raw.push_back({p[0], p[1]});
    }
  } else {
    constexpr std::array<double, 5> grid{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<std::size_t> idx(m, 0);
    while (true) {
      Eigen::VectorXd start(static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) start[static_cast<Eigen::Index>(j)] = grid[idx[j]];
      if (auto root = newton_power_sums(Ms, s, start)) {
        raw.emplace_back(root->data(), root->data() + m);
      }
      std::size_t j = 0;
      while (j < m && ++idx[j] == grid.size()) idx[j++] = 0;
      if (j == m) break;
    }
  }

  std::vector<std::vector<double>> out;
  for (auto& p : raw) {
    if (!inside_unit_box(p)) continue;
    canonicalize_within_ties(Ms, p);
    push_unique(out, std::move(p));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CandidateRow> evaluate_candidate(const Histogram& hist, std::span<const int> combo,
                                             const MomentSet& moments, const EmOptions& em,
                                             std::size_t candidate_index) {
  std::vector<CandidateRow> rows;
  const std::vector<int> Ms(combo.begin(), combo.end());
  int total = 0;
  for (int v : Ms) total += v;
  if (static_cast<std::size_t>(total) < hist.max_observed()) {
    rows.push_back({Ms, std::nullopt, kNegInf, 0, false, candidate_index, 0});
    return rows;
  }
  EmOptions options = em;
  options.fix_M = true;
  const auto solutions = solve_power_sums(Ms, moments);
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    CandidateRow row{Ms, ThetaVec(Ms, solutions[s]), kNegInf, 0, false, candidate_index, s};
    try {
      EmState state = run_em(hist, *row.theta, options);
      row.theta = std::move(state.theta_hat);
      row.log_lik = state.log_lik;
      row.iterations = state.iteration;
      row.converged = state.converged;
    } catch (const std::runtime_error&) {
      // infeasible seed or numerical breakdown: keep the -inf score
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

SearchResult run_search(const Histogram& hist, const SearchConfig& config) {
  const PoolRange pool = config.pool.value_or(default_pool(hist));
  const CandidateSet candidates = enumerate_candidates(config, pool);
  const MomentSet moments = sample_moments(hist);

  EmOptions em = config.em;
  if (!em.M_upper) em.M_upper = pool.hi;
  std::vector<std::vector<CandidateRow>> per_candidate(candidates.size());
  parallel_for(candidates.size(), worker_count(config.workers), [&](std::size_t l) {
    per_candidate[l] = evaluate_candidate(hist, candidates.combos[l], moments, em, l);
  });
  std::vector<CandidateRow> ranked;
  for (auto& rows : per_candidate) {
    for (auto& row : rows) ranked.push_back(std::move(row));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const CandidateRow& a, const CandidateRow& b) { return a.log_lik > b.log_lik; });

  if (ranked.empty() || !std::isfinite(ranked.front().log_lik)) {
    throw NoFeasibleCandidate("no feasible candidate among " + std::to_string(candidates.size()) +
                              " combinations from pool [" + std::to_string(pool.lo) + ", " +
                              std::to_string(pool.hi) + "]; max observed count is " +
                              std::to_string(hist.max_observed()));
  }
  const CandidateRow& top = ranked.front();
  EstimationResult best{*top.theta, top.log_lik, top.iterations, top.converged};
  return SearchResult{std::move(best), std::move(ranked), pool, candidates.size()};
}

}  // namespace photon_census
