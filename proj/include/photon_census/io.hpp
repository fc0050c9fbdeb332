#pragma once

// File formats and text conversions. Reals are written with 17 significant
// digits, '.' as decimal separator and no locale influence, so repeated runs
// produce byte-identical files.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "photon_census/crlb.hpp"
#include "photon_census/em.hpp"
#include "photon_census/model.hpp"
#include "photon_census/search.hpp"

namespace photon_census {

std::string format_real(double value);

// "M:p[,M:p...]"
ThetaVec parse_theta(std::string_view text);
std::string format_theta(const ThetaVec& theta);

// "lo:hi"
PoolRange parse_pool(std::string_view text);

// CSV with header `count,occurrences` and one row per photon number 0..N.
void write_histogram_csv(std::ostream& out, const Histogram& hist);
Histogram read_histogram_csv(std::istream& in);
// {"counts": [C_0, ..., C_N], "nu": nu}
void write_histogram_json(std::ostream& out, const Histogram& hist);
Histogram read_histogram_json(std::istream& in);
// Format chosen by extension: .json is JSON, anything else CSV.
Histogram read_histogram(const std::filesystem::path& path);
void write_histogram(const std::filesystem::path& path, const Histogram& hist);

// `count,probability`
void write_pmf_csv(std::ostream& out, const PmfTable& pmf);

// {"species": [{"M": int, "p": real}...], "log_lik": real, "iterations": int, "converged": bool}
void write_estimation_json(std::ostream& out, const EstimationResult& result);
EstimationResult read_estimation_json(std::istream& in);

// `rank,M_1..M_m,p_1..p_m,log_lik,iterations,converged`; at most `limit` rows
// (0 writes all).
void write_ranked_csv(std::ostream& out, std::span<const CandidateRow> ranked, int m, std::size_t limit = 0);

// `M,p,nu_exp[,log10_nu]`; singular cells print `inf`.
void write_nu_grid_csv(std::ostream& out, std::span<const NuGridCell> cells, bool with_log10);

void write_crlb_json(std::ostream& out, const ThetaVec& theta, const FisherMatrix& fim, const CrlbResult& bound);

}  // namespace photon_census
