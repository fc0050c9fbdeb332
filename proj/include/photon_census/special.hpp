#pragma once

namespace photon_census {

// ln Gamma(x) for x > 0. Thread-safe (does not touch signgam).
double log_gamma(double x);

// Digamma psi(x) = d/dx ln Gamma(x). Recurrence up to x >= 10 followed by
// the asymptotic Bernoulli series; reflection for negative non-integers.
// Absolute error below 1e-13 on (0, 1e4].
double digamma(double x);

// ln C(n, k) with a real-valued n (Gamma continuation), requires n > k - 1.
double log_choose(double n, double k);

}  // namespace photon_census
