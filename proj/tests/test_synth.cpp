#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "photon_census/model.hpp"
#include "photon_census/synth.hpp"

using namespace photon_census;

namespace {

double sample_mean(const Histogram& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.counts().size(); ++i) s += static_cast<double>(i) * static_cast<double>(h[i]);
  return s / static_cast<double>(h.nu());
}

// Two-sample chi-square over bins 0..bins-2 plus an overflow bin.
double two_sample_chi2(const Histogram& a, const Histogram& b, int bins, int& dof) {
  auto binned = [bins](const Histogram& h) {
    std::vector<double> out(bins, 0.0);
    for (std::size_t i = 0; i < h.counts().size(); ++i) out[std::min<std::size_t>(i, bins - 1)] += h[i];
    return out;
  };
  const auto x = binned(a);
  const auto y = binned(b);
  const double na = static_cast<double>(a.nu()), nb = static_cast<double>(b.nu());
  const double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
  double chi2 = 0.0;
  int used = 0;
  for (int k = 0; k < bins; ++k) {
    if (x[k] + y[k] == 0.0) continue;
    const double d = ka * x[k] - kb * y[k];
    chi2 += d * d / (x[k] + y[k]);
    ++used;
  }
  dof = used - 1;
  return chi2;
}

}  // namespace

TEST_CASE("degenerate species") {
  const auto dark = sample_counts({ThetaVec({{8, 0.0}}), 100, 1});
  CHECK(dark.counts().size() == 1);
  CHECK(dark[0] == 100);

  const auto sure = sample_counts({ThetaVec({{3, 1.0}, {2, 1.0}}), 50, 1});
  CHECK(sure.max_count() == 5);
  CHECK(sure[5] == 50);
  CHECK(sure.nu() == 50);

  const auto sure_inv = sample_counts_by_inversion({ThetaVec({{3, 1.0}, {2, 1.0}}), 50, 1});
  CHECK(sure_inv[5] == 50);
}

TEST_CASE("sample mean within the CLT band") {
  const ThetaVec t({{8, 0.1}, {10, 0.2}, {12, 0.3}});
  const auto h = sample_counts({t, 1000000, 2024});
  CHECK(h.nu() == 1000000);
  CHECK(std::abs(sample_mean(h) - 6.4) <= 3.0 * std::sqrt(4.84 / 1e6));
  CHECK(h.max_count() == h.max_observed());
}

TEST_CASE("bernoulli frequency by inversion") {
  for (std::uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
    const auto h = sample_counts_by_inversion({ThetaVec({{1, 0.5}}), 1000000, seed});
    CHECK(std::abs(static_cast<double>(h[1]) / 1e6 - 0.5) <= 0.002);
  }
}

TEST_CASE("single experiment") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = sample_counts_by_inversion({ThetaVec({{8, 0.1}, {10, 0.2}}), 1, seed});
    int nonzero = 0;
    for (auto c : h.counts()) {
      if (c) {
        ++nonzero;
        CHECK(c == 1);
      }
    }
    CHECK(nonzero == 1);
    CHECK(h.nu() == 1);
  }
}

TEST_CASE("inversion frequencies lie in 4-sigma multinomial bands") {
  const ThetaVec t({{8, 0.1}, {10, 0.2}, {12, 0.3}});
  const double nu = 1e7;
  const auto h = sample_counts_by_inversion({t, static_cast<std::uint64_t>(nu), 77});
  const auto pmf = convolve_pmf(t);
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double expected = nu * pmf[i];
    const double sigma = std::sqrt(nu * pmf[i] * (1.0 - pmf[i]));
    INFO("bin " << i);
    CHECK(std::abs(static_cast<double>(h[i]) - expected) <= 4.0 * sigma);
  }
}

TEST_CASE("determinism and worker independence") {
  const SimConfig cfg{ThetaVec({{8, 0.1}, {70, 0.05}}), 300000, 42};
  const auto a = sample_counts(cfg, 1);
  CHECK(a == sample_counts(cfg, 1));
  CHECK(a == sample_counts(cfg, 3));
  const auto b = sample_counts_by_inversion(cfg, 1);
  CHECK(b == sample_counts_by_inversion(cfg, 4));
  CHECK(a.nu() == 300000);
  CHECK(b.nu() == 300000);
  CHECK_FALSE(a == sample_counts({cfg.theta, cfg.num_experiments, 43}, 1));
}

TEST_CASE("large-M species use CDF inversion and keep the mean") {
  const auto h = sample_counts({ThetaVec({{500, 0.3}}), 200000, 8});
  CHECK(std::abs(sample_mean(h) - 150.0) <= 4.0 * std::sqrt(105.0 / 2e5));
}

TEST_CASE("direct and inversion paths agree in distribution") {
  const ThetaVec t({{8, 0.1}, {10, 0.2}, {12, 0.3}});
  int accepted = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = sample_counts({t, 100000, seed});
    const auto b = sample_counts_by_inversion({t, 100000, seed + 1000});
    int dof = 0;
    const double chi2 = two_sample_chi2(a, b, 20, dof);
    const double critical = boost::math::quantile(boost::math::chi_squared(dof), 0.999);
    if (chi2 <= critical) ++accepted;
  }
  CHECK(accepted >= 48);
}
