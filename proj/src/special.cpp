#include "photon_census/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace photon_census {

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double digamma(double x) {
  if (std::isnan(x)) return x;
  if (x <= 0.0 && x == std::floor(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x < 0.0) {
    // psi(1 - x) - psi(x) = pi cot(pi x)
    return digamma(1.0 - x) - std::numbers::pi / std::tan(std::numbers::pi * x);
  }
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli terms B_2k / (2k x^2k), k = 1..7
  const double series =
      inv2 * (1.0 / 12.0 -
      inv2 * (1.0 / 120.0 -
      inv2 * (1.0 / 252.0 -
      inv2 * (1.0 / 240.0 -
      inv2 * (1.0 / 132.0 -
      inv2 * (691.0 / 32760.0 -
      inv2 * (1.0 / 12.0)))))));
  return result + std::log(x) - 0.5 * inv - series;
}

double log_choose(double n, double k) {
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

}  // namespace photon_census
