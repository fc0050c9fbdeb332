#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "photon_census/errors.hpp"
#include "photon_census/search.hpp"
#include "photon_census/synth.hpp"

using namespace photon_census;
using doctest::Approx;

namespace {

bool contains_solution(const std::vector<std::vector<double>>& sols, const std::vector<double>& want, double tol) {
  for (const auto& s : sols) {
    if (s.size() != want.size()) continue;
    bool close = true;
    for (std::size_t j = 0; j < s.size(); ++j) close = close && std::abs(s[j] - want[j]) <= tol;
    if (close) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("sample moments") {
  const auto point = sample_moments(Histogram({0, 0, 0, 10}));
  CHECK(point.mu1 == 3.0);
  CHECK(point.mu2 == 0.0);
  CHECK(point.mu3 == 0.0);
  CHECK(point.mu4 == 0.0);

  const auto two = sample_moments(Histogram({1, 0, 1}));
  CHECK(two.mu1 == 1.0);
  CHECK(two.mu2 == 1.0);
  CHECK(two.mu3 == 0.0);
  CHECK(two.mu4 == 1.0);

  const auto sim = sample_moments(sample_counts({ThetaVec({{8, 0.1}}), 1000000, 71}));
  CHECK(std::abs(sim.mu1 - 0.8) <= 3.0 * std::sqrt(0.72 / 1e6));
}

TEST_CASE("candidate enumeration") {
  const auto a = enumerate_candidates(2, {1, 4}, false);
  REQUIRE(a.size() == 6);
  const std::vector<std::vector<int>> expect = {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}};
  CHECK(a.combos == expect);

  const auto b = enumerate_candidates(1, {5, 5}, false);
  REQUIRE(b.size() == 1);
  CHECK(b.combos[0] == std::vector<int>{5});

  CHECK(enumerate_candidates(3, {1, 20}, false).size() == 1140);
  // multisets of size 3 from 20 values: C(22,3)
  CHECK(enumerate_candidates(3, {1, 20}, true).size() == 1540);
  CHECK(enumerate_candidates(2, {1, 4}, true).size() == 10);

  CHECK_THROWS_AS(enumerate_candidates(3, {1, 2}, false), DomainError);
  CHECK_THROWS_AS(enumerate_candidates(1, {0, 2}, false), DomainError);
  CHECK_THROWS_AS(enumerate_candidates(1, {3, 2}, true), DomainError);
}

TEST_CASE("polynomial roots") {
  // (x - 0.2)(x - 0.7) = x^2 - 0.9x + 0.14
  const double quad[] = {0.14, -0.9, 1.0};
  auto r = real_polynomial_roots(quad);
  std::sort(r.begin(), r.end());
  REQUIRE(r.size() == 2);
  CHECK(r[0] == Approx(0.2).epsilon(1e-12));
  CHECK(r[1] == Approx(0.7).epsilon(1e-12));

  const double none[] = {1.0, 0.0, 1.0};
  CHECK(real_polynomial_roots(none).empty());
}

TEST_CASE("power-sum solver: single species") {
  const MomentSet mom = population_moments(ThetaVec({{8, 0.1}}));
  const int eight[] = {8};
  const auto sols = solve_power_sums(eight, mom);
  REQUIRE(sols.size() == 1);
  CHECK(sols[0][0] == Approx(0.1).epsilon(1e-12));
  // binomial method of moments recovers M as well
  CHECK(mom.mu1 * mom.mu1 / (mom.mu1 - mom.mu2) == Approx(8.0).epsilon(1e-12));

  // mean at or above M leaves no interior solution
  const int three[] = {3};
  CHECK(solve_power_sums(three, MomentSet{3.5, 1.0, 0.0, 0.0}).empty());
  CHECK(solve_power_sums(three, MomentSet{0.0, 0.0, 0.0, 0.0}).empty());
}

TEST_CASE("power-sum solver: two species round trip") {
  const ThetaVec t({{8, 0.1}, {10, 0.2}});
  const int ms[] = {8, 10};
  const auto sols = solve_power_sums(ms, population_moments(t));
  CHECK(contains_solution(sols, {0.1, 0.2}, 1e-8));
  for (const auto& s : sols) {
    for (double p : s) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("power-sum solver: random round trips") {
  std::mt19937_64 gen(101);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 1 + trial % 3;
    std::vector<double> ps;
    while (static_cast<int>(ps.size()) < m) {
      const double p = 0.05 + 0.9 * std::uniform_real_distribution<double>(0.0, 1.0)(gen);
      bool far = true;
      for (double q : ps) far = far && std::abs(p - q) >= 0.05;
      if (far) ps.push_back(p);
    }
    std::vector<SpeciesParams> sp;
    for (int j = 0; j < m; ++j) sp.push_back({1 + static_cast<int>(gen() % 15), ps[j]});
    std::sort(sp.begin(), sp.end(), [](auto a, auto b) {
      return a.emitters != b.emitters ? a.emitters < b.emitters : a.detect_prob < b.detect_prob;
    });
    std::vector<int> Ms;
    std::vector<double> want;
    for (const auto& s : sp) {
      Ms.push_back(s.emitters);
      want.push_back(s.detect_prob);
    }
    const auto sols = solve_power_sums(Ms, population_moments(ThetaVec(sp)));
    INFO("trial " << trial);
    CHECK(contains_solution(sols, want, 1e-8));
  }
}

TEST_CASE("search: single species") {
  const auto h = sample_counts({ThetaVec({{8, 0.1}}), 1000000, 55});
  SearchConfig cfg;
  cfg.m = 1;
  cfg.pool = PoolRange{1, 20};
  const auto res = run_search(h, cfg);
  CHECK(res.best.theta[0].emitters == 8);
  CHECK(res.best.theta[0].detect_prob == Approx(0.1).epsilon(0.02));
  CHECK(res.candidates == 20);
  // winner optimality
  for (const auto& row : res.ranked) CHECK(row.log_lik <= res.best.log_lik);
}

TEST_CASE("search: candidates that cannot reach the max count score minus infinity") {
  // max observed count 9, underdispersed like any sum of binomials
  const Histogram h = sample_counts({ThetaVec({{6, 0.5}, {6, 0.6}}), 400, 17});
  REQUIRE(h.max_observed() >= 9);
  const int combo[] = {3, 5};  // 8 < max observed
  const auto rows = evaluate_candidate(h, combo, sample_moments(h), EmOptions{});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].log_lik == -std::numeric_limits<double>::infinity());
  CHECK_FALSE(rows[0].theta.has_value());

  SearchConfig cfg;
  cfg.m = 2;
  cfg.pool = PoolRange{1, 8};
  const auto res = run_search(h, cfg);
  CHECK(res.best.theta.total_emitters() >= static_cast<int>(h.max_observed()));
  for (const auto& row : res.ranked) {
    int total = 0;
    for (int v : row.combo) total += v;
    if (total < static_cast<int>(h.max_observed())) CHECK(row.log_lik == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("search: no feasible candidate") {
  const Histogram h({1, 1, 1, 1, 1, 1, 1, 1});
  SearchConfig cfg;
  cfg.m = 1;
  cfg.pool = PoolRange{1, 4};
  CHECK_THROWS_AS(run_search(h, cfg), NoFeasibleCandidate);
  try {
    run_search(h, cfg);
  } catch (const NoFeasibleCandidate& e) {
    CHECK(std::string(e.what()).find('7') != std::string::npos);
  }
}

TEST_CASE("search: ranked table is deterministic across worker counts") {
  const auto h = sample_counts({ThetaVec({{4, 0.2}, {6, 0.5}}), 20000, 6});
  SearchConfig cfg;
  cfg.m = 2;
  cfg.pool = PoolRange{1, 12};
  cfg.workers = 1;
  const auto a = run_search(h, cfg);
  cfg.workers = 3;
  const auto b = run_search(h, cfg);
  REQUIRE(a.ranked.size() == b.ranked.size());
  for (std::size_t r = 0; r < a.ranked.size(); ++r) {
    CHECK(a.ranked[r].combo == b.ranked[r].combo);
    CHECK(a.ranked[r].theta == b.ranked[r].theta);
    CHECK(a.ranked[r].log_lik == b.ranked[r].log_lik);
  }
  CHECK(a.best.theta == b.best.theta);
  // every candidate EM run keeps its emitter counts
  for (const auto& row : a.ranked) {
    if (!row.theta) continue;
    auto got = row.theta->emitters();
    auto want = row.combo;
    std::sort(got.begin(), got.end());
    CHECK(got == want);
  }
}

TEST_CASE("search: population-exact histogram picks the truth") {
  const ThetaVec truth({{8, 0.1}, {10, 0.2}});
  const auto h = oracle::population_histogram(truth, 1e9);
  SearchConfig cfg;
  cfg.m = 2;
  cfg.pool = PoolRange{1, 15};
  const auto res = run_search(h, cfg);
  CHECK(res.best.theta.emitters() == truth.emitters());
  for (std::size_t j = 0; j < 2; ++j) CHECK(res.best.theta[j].detect_prob == Approx(truth[j].detect_prob).epsilon(1e-6));
  CHECK(res.best.log_lik >= log_likelihood(h, truth) - 1e-6 * std::abs(res.best.log_lik));
}

TEST_CASE("default pool") {
  const Histogram h({0, 0, 0, 10});
  const auto pool = default_pool(h);
  CHECK(pool.lo == 1);
  CHECK(pool.hi == 12);
}
