#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "photon_census/em.hpp"
#include "photon_census/errors.hpp"
#include "photon_census/model.hpp"
#include "photon_census/synth.hpp"

using namespace photon_census;
using doctest::Approx;

namespace {

Histogram point_hist(std::size_t i, std::uint64_t c) {
  std::vector<std::uint64_t> counts(i + 1, 0);
  counts[i] = c;
  return Histogram(std::move(counts));
}

double hist_mean(const Histogram& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.counts().size(); ++i) s += static_cast<double>(i) * static_cast<double>(h[i]);
  return s / static_cast<double>(h.nu());
}

}  // namespace

TEST_CASE("log-likelihood") {
  CHECK(log_likelihood(point_hist(0, 1), ThetaVec({{8, 0.1}})) == Approx(8 * std::log(0.9)).epsilon(1e-14));
  CHECK(log_likelihood(point_hist(0, 1), ThetaVec({{8, 0.1}})) == Approx(-0.8428841).epsilon(1e-7));
  CHECK(log_likelihood(point_hist(1, 5), ThetaVec({{1, 1.0}})) == 0.0);
  CHECK(log_likelihood(point_hist(3, 1), ThetaVec({{2, 0.5}})) == -std::numeric_limits<double>::infinity());

  // weighted sum of log pmf
  const ThetaVec t({{3, 0.3}, {2, 0.6}});
  const Histogram h({4, 0, 7, 1, 0, 2});
  const auto pmf = convolve_pmf(t);
  const double expect = 4 * std::log(pmf[0]) + 7 * std::log(pmf[2]) + std::log(pmf[3]) + 2 * std::log(pmf[5]);
  CHECK(log_likelihood(h, t) == Approx(expect).epsilon(1e-13));
}

TEST_CASE("posterior marginals: single species owns every photon") {
  const Histogram h({5, 3, 2, 1});
  const auto post = posterior_marginals(h, ThetaVec({{6, 0.3}}));
  for (std::size_t i = 0; i <= 3; ++i) {
    CHECK(post(0, i, static_cast<int>(i)) == Approx(1.0).epsilon(1e-15));
    CHECK(post.expected(0, i) == Approx(static_cast<double>(i)).epsilon(1e-15));
  }
}

TEST_CASE("posterior marginals: symmetric pair") {
  const Histogram h({1, 4, 1});
  const auto post = posterior_marginals(h, ThetaVec({{1, 0.5}, {1, 0.5}}));
  CHECK(post(0, 1, 0) == Approx(0.5));
  CHECK(post(0, 1, 1) == Approx(0.5));
  CHECK(post(1, 1, 0) == Approx(0.5));
  CHECK(post(1, 1, 1) == Approx(0.5));
}

TEST_CASE("posterior marginals: conservation and partition equivalence") {
  const ThetaVec t({{8, 0.1}, {10, 0.2}});
  const Histogram h({1, 1, 1, 1});
  const auto post = posterior_marginals(h, t);
  CHECK(post.expected(0, 3) + post.expected(1, 3) == Approx(3.0).epsilon(1e-12));

  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 1 + trial % 3;
    const ThetaVec th = oracle::random_theta(gen, m, 12 / m);
    const int total = th.total_emitters();
    const Histogram full(std::vector<std::uint64_t>(total + 1, 1));
    const auto q = posterior_marginals(full, th);
    const auto caps = th.emitters();
    for (int i = 0; i <= total; ++i) {
      // explicit enumeration of E[Y_j | Y = i]
      std::vector<double> num(m, 0.0);
      double den = 0.0;
      for (const auto& c : enumerate_partitions(i, caps)) {
        double w = 1.0;
        for (int j = 0; j < m; ++j) w *= oracle::binomial(c[j], caps[j], th[j].detect_prob);
        den += w;
        for (int j = 0; j < m; ++j) num[j] += w * c[j];
      }
      double sum_expected = 0.0;
      for (int j = 0; j < m; ++j) {
        CHECK(std::abs(q.expected(j, i) - num[j] / den) <= 1e-12 * std::max(1.0, num[j] / den));
        sum_expected += q.expected(j, i);
        double row = 0.0;
        for (int y = 0; y <= caps[j]; ++y) {
          row += q(j, i, y);
          if (y > i || i - y > total - caps[j]) CHECK(q(j, i, y) == 0.0);
        }
        CHECK(row == Approx(1.0).epsilon(1e-10));
      }
      CHECK(sum_expected == Approx(static_cast<double>(i)).epsilon(1e-10));
    }
  }
}

TEST_CASE("posterior marginals reject infeasible counts") {
  CHECK_THROWS_AS(posterior_marginals(point_hist(3, 1), ThetaVec({{2, 0.5}})), InfeasibleError);
}

TEST_CASE("p update") {
  const auto h = sample_counts({ThetaVec({{8, 0.1}}), 100000, 5});
  const int eight[] = {8};
  const auto post = posterior_marginals(h, ThetaVec({{8, 0.3}}));
  const auto p = em_update_p(h, post, eight);
  CHECK(p[0] == Approx(hist_mean(h) / 8).epsilon(1e-13));

  const Histogram zeros({40});
  const int two[] = {3, 5};
  const auto pz = em_update_p(zeros, posterior_marginals(zeros, ThetaVec({{3, 0.2}, {5, 0.4}})), two);
  CHECK(pz[0] == kProbClamp);
  CHECK(pz[1] == kProbClamp);

  const Histogram ones({0, 100});
  const int pair[] = {1, 1};
  const auto ph = em_update_p(ones, posterior_marginals(ones, ThetaVec({{1, 0.5}, {1, 0.5}})), pair);
  CHECK(ph[0] == Approx(0.5));
  CHECK(ph[1] == Approx(0.5));
}

TEST_CASE("integer M update") {
  const Histogram h = point_hist(2, 100);
  const auto post = posterior_marginals(h, ThetaVec({{5, 0.5}}));
  const double p_one[] = {1.0};
  const EmitterRange r[] = {{2, 30}};
  CHECK(em_update_M(h, post, p_one, r)[0] == 2);

  // exact Q scan at the population-moment p
  const auto sim = sample_counts({ThetaVec({{8, 0.1}}), 1000000, 9});
  const double p_hat[] = {hist_mean(sim) / 8};
  const EmitterRange wide[] = {{static_cast<int>(sim.max_observed()), 30}};
  const auto post1 = posterior_marginals(sim, ThetaVec({{8, p_hat[0]}}));
  CHECK(em_update_M(sim, post1, p_hat, wide)[0] == 8);

  // identical posteriors give identical M
  const Histogram sym({10, 20, 10});
  const auto post2 = posterior_marginals(sym, ThetaVec({{1, 0.5}, {1, 0.5}}));
  const double p_sym[] = {0.5, 0.5};
  const EmitterRange rs[] = {{1, 10}, {1, 10}};
  const auto ms = em_update_M(sym, post2, p_sym, rs);
  CHECK(ms[0] == ms[1]);

  const EmitterRange bad[] = {{5, 4}};
  CHECK_THROWS_AS(em_update_M(h, post, p_one, bad), DomainError);
}

TEST_CASE("M update without photons picks the smallest count") {
  const Histogram zeros({50});
  const auto post = posterior_marginals(zeros, ThetaVec({{4, 0.3}}));
  const double p[] = {1e-300};
  const EmitterRange r[] = {{1, 9}};
  CHECK(em_update_M(zeros, post, p, r)[0] == 1);
}

TEST_CASE("run_em recovers a single species from a poor start") {
  const auto h = sample_counts({ThetaVec({{8, 0.1}}), 1000000, 314});
  const auto st = run_em(h, ThetaVec({{10, 0.08}}));
  CHECK(st.converged);
  CHECK(st.theta_hat[0].emitters == 8);
  CHECK(st.theta_hat[0].detect_prob == Approx(0.1).epsilon(0.01));
}

TEST_CASE("run_em fixed point at the truth") {
  const ThetaVec truth({{8, 0.1}, {10, 0.2}});
  const auto h = oracle::population_histogram(truth, 1e9);
  const auto st = run_em(h, truth);
  CHECK(st.iteration <= 2);
  CHECK(st.converged);
  CHECK(st.theta_hat.emitters() == truth.emitters());
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(st.theta_hat[j].detect_prob - truth[j].detect_prob) <= 1e-8);
}

TEST_CASE("run_em rejects infeasible or boundary starts") {
  const Histogram h({1, 2, 3, 4, 1});
  EmOptions fixed;
  fixed.fix_M = true;
  CHECK_THROWS_AS(run_em(h, ThetaVec({{3, 0.4}}), fixed), InfeasibleError);
  CHECK_THROWS_AS(run_em(h, ThetaVec({{6, 1.0}}), fixed), DomainError);
}

TEST_CASE("single species with fixed M converges in one step") {
  const auto h = sample_counts({ThetaVec({{12, 0.35}}), 50000, 2});
  EmOptions fixed;
  fixed.fix_M = true;
  const auto st = run_em(h, ThetaVec({{15, 0.6}}), fixed);
  CHECK(st.theta_hat[0].emitters == 15);
  CHECK(st.theta_hat[0].detect_prob == Approx(hist_mean(h) / 15).epsilon(1e-12));
  // the second step repeats the first
  CHECK(st.iteration == 2);
  CHECK(st.converged);
  CHECK(st.trace[2] == Approx(st.trace[1]).epsilon(1e-14));
}

TEST_CASE("log-likelihood never decreases") {
  std::mt19937_64 gen(8);
  for (int run = 0; run < 12; ++run) {
    const int m = 1 + run % 3;
    const ThetaVec truth = oracle::random_theta(gen, m, 12);
    const auto h = sample_counts({truth, 5000, static_cast<std::uint64_t>(run)});
    std::vector<SpeciesParams> init;
    int floor_total = 0;
    for (int j = 0; j < m; ++j) {
      init.push_back({1 + static_cast<int>(gen() % 15), 0.05 + 0.9 * static_cast<double>(gen() % 1000) / 1000.0});
      floor_total += init.back().emitters;
    }
    if (floor_total < static_cast<int>(h.max_observed())) init[0].emitters += static_cast<int>(h.max_observed()) - floor_total;
    for (MStep step : {MStep::Profile, MStep::Sequential}) {
      EmOptions opt;
      opt.m_step = step;
      opt.max_iter = 200;
      const auto st = run_em(h, ThetaVec(init), opt);
      for (std::size_t k = 1; k < st.trace.size(); ++k) CHECK(st.trace[k] >= st.trace[k - 1] - 1e-9);
    }
  }
}

TEST_CASE("permuting the start gives the same estimate") {
  const auto h = sample_counts({ThetaVec({{6, 0.15}, {9, 0.4}}), 20000, 12});
  const int ma[] = {7, 9};
  const double pa[] = {0.2, 0.35};
  const int mb[] = {9, 7};
  const double pb[] = {0.35, 0.2};
  EmOptions opt;
  opt.max_iter = 300;
  const auto a = run_em(h, ThetaVec(ma, pa), opt);
  const auto b = run_em(h, ThetaVec(mb, pb), opt);
  CHECK(a.theta_hat == b.theta_hat);
  CHECK(a.log_lik == b.log_lik);
}

TEST_CASE("default emitter upper bound") {
  const Histogram h = point_hist(3, 10);
  // mean 3, variance 0: 4 * ceil(3) = 12
  CHECK(default_emitter_upper(h) == 12);
  CHECK(default_emitter_upper(Histogram({5})) == 1);
}
