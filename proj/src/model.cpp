#include "photon_census/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "photon_census/errors.hpp"
#include "photon_census/special.hpp"

namespace photon_census {

namespace {

void validate_species(const SpeciesParams& s) {
  if (s.emitters < 1) {
    throw DomainError("species emitter count must be >= 1, got " + std::to_string(s.emitters));
  }
  if (!(s.detect_prob >= 0.0 && s.detect_prob <= 1.0)) {
    throw DomainError("detection probability must lie in [0, 1]");
  }
}

bool canonical_less(const SpeciesParams& a, const SpeciesParams& b) {
  if (a.detect_prob != b.detect_prob) return a.detect_prob < b.detect_prob;
  return a.emitters < b.emitters;
}

}  // namespace

ThetaVec::ThetaVec(std::vector<SpeciesParams> species) : species_(std::move(species)) {
  if (species_.empty()) throw DomainError("theta needs at least one species");
  for (const auto& s : species_) validate_species(s);
  std::stable_sort(species_.begin(), species_.end(), canonical_less);
}

ThetaVec::ThetaVec(std::span<const int> emitters, std::span<const double> detect_probs)
    : ThetaVec([&] {
        if (emitters.size() != detect_probs.size()) {
          throw DomainError("emitter and probability lists differ in length");
        }
        std::vector<SpeciesParams> s(emitters.size());
        for (std::size_t j = 0; j < s.size(); ++j) s[j] = {emitters[j], detect_probs[j]};
        return s;
      }()) {}

int ThetaVec::total_emitters() const {
  int total = 0;
  for (const auto& s : species_) total += s.emitters;
  return total;
}

std::vector<int> ThetaVec::emitters() const {
  std::vector<int> out;
  out.reserve(species_.size());
  for (const auto& s : species_) out.push_back(s.emitters);
  return out;
}

std::vector<double> ThetaVec::detect_probs() const {
  std::vector<double> out;
  out.reserve(species_.size());
  for (const auto& s : species_) out.push_back(s.detect_prob);
  return out;
}

bool ThetaVec::interior() const {
  return std::all_of(species_.begin(), species_.end(),
                     [](const SpeciesParams& s) { return s.detect_prob > 0.0 && s.detect_prob < 1.0; });
}

Histogram::Histogram(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw DomainError("histogram has no bins");
  nu_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
  if (nu_ == 0) throw DomainError("histogram must record at least one experiment");
}

std::size_t Histogram::max_observed() const {
  std::size_t i = counts_.size() - 1;
  while (i > 0 && counts_[i] == 0) --i;
  return i;
}

double log_binomial_pmf(int y, double emitters, double p) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (y < 0 || static_cast<double>(y) > emitters) return kNegInf;
  const double rest = emitters - y;
  double value = log_choose(emitters, y);
  if (y > 0) value += (p > 0.0) ? y * std::log(p) : kNegInf;
  if (rest > 0.0) value += (p < 1.0) ? rest * std::log1p(-p) : kNegInf;
  return value;
}

double binomial_pmf(int y, int emitters, double p) {
  if (emitters < 0 || y < 0 || y > emitters) {
    throw DomainError("binomial_pmf requires 0 <= y <= M");
  }
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial_pmf requires p in [0, 1]");
  return std::exp(log_binomial_pmf(y, emitters, p));
}

std::vector<double> binomial_table(int emitters, double p) {
  std::vector<double> table(static_cast<std::size_t>(emitters) + 1);
  for (int y = 0; y <= emitters; ++y) table[y] = std::exp(log_binomial_pmf(y, emitters, p));
  return table;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
  }
  return out;
}

PmfTable convolve_pmf(const ThetaVec& theta) {
  std::vector<double> acc{1.0};
  for (const auto& s : theta) acc = convolve(acc, binomial_table(s.emitters, s.detect_prob));
  return PmfTable{std::move(acc)};
}

std::vector<std::vector<double>> leave_one_out(const std::vector<std::vector<double>>& tables) {
  const std::size_t m = tables.size();
  std::vector<std::vector<double>> prefix(m + 1), suffix(m + 1);
  prefix[0] = {1.0};
  for (std::size_t j = 0; j < m; ++j) prefix[j + 1] = convolve(prefix[j], tables[j]);
  suffix[m] = {1.0};
  for (std::size_t j = m; j-- > 0;) suffix[j] = convolve(tables[j], suffix[j + 1]);
  std::vector<std::vector<double>> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = convolve(prefix[j], suffix[j + 1]);
  return out;
}

std::vector<std::vector<int>> enumerate_partitions(int total, std::span<const int> caps) {
  std::vector<std::vector<int>> out;
  if (caps.empty() || total < 0) return out;
  const std::size_t m = caps.size();
  // remaining[j]: largest sum attainable from parts j..m-1
  std::vector<int> remaining(m + 1, 0);
  for (std::size_t j = m; j-- > 0;) remaining[j] = remaining[j + 1] + caps[j];
  if (total > remaining[0]) return out;

  std::vector<int> current(m, 0);
  auto recurse = [&](auto&& self, std::size_t j, int left) -> void {
    if (j + 1 == m) {
      if (left <= caps[j]) {
        current[j] = left;
        out.push_back(current);
      }
      return;
    }
    const int lo = std::max(0, left - remaining[j + 1]);
    const int hi = std::min(left, caps[j]);
    for (int v = lo; v <= hi; ++v) {
      current[j] = v;
      self(self, j + 1, left - v);
    }
  };
  recurse(recurse, 0, total);
  return out;
}

double pmf_via_partitions(const ThetaVec& theta, int y) {
  const auto caps = theta.emitters();
  double total = 0.0;
  for (const auto& parts : enumerate_partitions(y, caps)) {
    double term = 1.0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      term *= binomial_pmf(parts[j], theta[j].emitters, theta[j].detect_prob);
    }
    total += term;
  }
  return total;
}

GaussianApprox gaussian_approx(const ThetaVec& theta) {
  GaussianApprox g;
  for (const auto& s : theta) {
    const double mp = s.emitters * s.detect_prob;
    g.mean += mp;
    g.variance += mp * (1.0 - s.detect_prob);
  }
  return g;
}

MomentSet population_moments(const ThetaVec& theta) {
  MomentSet mom;
  double kappa4 = 0.0;
  for (const auto& s : theta) {
    const double p = s.detect_prob;
    const double mpq = s.emitters * p * (1.0 - p);
    mom.mu1 += s.emitters * p;
    mom.mu2 += mpq;
    mom.mu3 += mpq * (1.0 - 2.0 * p);
    kappa4 += mpq * (1.0 - 6.0 * p * (1.0 - p));
  }
  mom.mu4 = kappa4 + 3.0 * mom.mu2 * mom.mu2;
  return mom;
}

PowerSums power_sums_from_moments(const MomentSet& m) {
  return {
      m.mu1,
      m.mu1 - m.mu2,
      0.5 * (2.0 * m.mu1 - 3.0 * m.mu2 + m.mu3),
      (6.0 * m.mu1 - 11.0 * m.mu2 + 3.0 * m.mu2 * m.mu2 + 6.0 * m.mu3 - m.mu4) / 6.0,
  };
}

PowerSums power_sums(const ThetaVec& theta) {
  PowerSums s{};
  for (const auto& sp : theta) {
    double pk = 1.0;
    for (int k = 0; k < 4; ++k) {
      pk *= sp.detect_prob;
      s[k] += sp.emitters * pk;
    }
  }
  return s;
}

}  // namespace photon_census
