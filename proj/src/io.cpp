#include "photon_census/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "photon_census/errors.hpp"

namespace photon_census {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, const char* what) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DomainError(fmt::format("cannot parse {} from '{}'", what, text));
  }
  return value;
}

json real_json(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

}  // namespace

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", value);
}

ThetaVec parse_theta(std::string_view text) {
  std::vector<SpeciesParams> species;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw DomainError("theta entries must look like M:p");
    species.push_back({parse_number<int>(item.substr(0, colon), "emitter count"),
                       parse_number<double>(item.substr(colon + 1), "detection probability")});
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return ThetaVec(std::move(species));
}

std::string format_theta(const ThetaVec& theta) {
  std::string out;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (j) out += ',';
    out += fmt::format("{}:{}", theta[j].emitters, format_real(theta[j].detect_prob));
  }
  return out;
}

PoolRange parse_pool(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw DomainError("pool must look like lo:hi");
  return {parse_number<int>(text.substr(0, colon), "pool bound"),
          parse_number<int>(text.substr(colon + 1), "pool bound")};
}

void write_histogram_csv(std::ostream& out, const Histogram& hist) {
  out << "count,occurrences\n";
  const auto counts = hist.counts();
  for (std::size_t i = 0; i < counts.size(); ++i) out << i << ',' << counts[i] << '\n';
}

Histogram read_histogram_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "count,occurrences") {
    throw DomainError("histogram CSV must start with header 'count,occurrences'");
  }
  std::vector<std::uint64_t> counts;
  while (std::getline(in, line)) {
    const auto row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) throw DomainError("histogram CSV rows need two columns");
    const auto index = parse_number<std::size_t>(row.substr(0, comma), "photon count");
    if (index != counts.size()) {
      throw DomainError(fmt::format("histogram CSV rows must list photon numbers 0..N in order; got {} at row {}",
                                    index, counts.size()));
    }
    counts.push_back(parse_number<std::uint64_t>(row.substr(comma + 1), "occurrences"));
  }
  return Histogram(std::move(counts));
}

void write_histogram_json(std::ostream& out, const Histogram& hist) {
  json doc;
  doc["counts"] = std::vector<std::uint64_t>(hist.counts().begin(), hist.counts().end());
  doc["nu"] = hist.nu();
  out << doc.dump() << '\n';
}

Histogram read_histogram_json(std::istream& in) {
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DomainError(std::string("invalid histogram JSON: ") + e.what());
  }
  if (!doc.contains("counts") || !doc["counts"].is_array()) throw DomainError("histogram JSON needs a 'counts' array");
  Histogram hist(doc["counts"].get<std::vector<std::uint64_t>>());
  if (doc.contains("nu") && doc["nu"].get<std::uint64_t>() != hist.nu()) {
    throw DomainError("histogram JSON 'nu' disagrees with the sum of counts");
  }
  return hist;
}

Histogram read_histogram(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open histogram file " + path.string());
  return path.extension() == ".json" ? read_histogram_json(in) : read_histogram_csv(in);
}

void write_histogram(const std::filesystem::path& path, const Histogram& hist) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (path.extension() == ".json") {
    write_histogram_json(out, hist);
  } else {
    write_histogram_csv(out, hist);
  }
}

void write_pmf_csv(std::ostream& out, const PmfTable& pmf) {
  out << "count,probability\n";
  for (std::size_t y = 0; y < pmf.size(); ++y) out << y << ',' << format_real(pmf.probs[y]) << '\n';
}

void write_estimation_json(std::ostream& out, const EstimationResult& result) {
  json doc;
  doc["species"] = json::array();
  for (const auto& s : result.theta) doc["species"].push_back({{"M", s.emitters}, {"p", s.detect_prob}});
  doc["log_lik"] = real_json(result.log_lik);
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  out << doc.dump(2) << '\n';
}

EstimationResult read_estimation_json(std::istream& in) {
  const json doc = json::parse(in);
  std::vector<SpeciesParams> species;
  for (const auto& s : doc.at("species")) species.push_back({s.at("M").get<int>(), s.at("p").get<double>()});
  const auto& ll = doc.at("log_lik");
  const double log_lik = ll.is_number() ? ll.get<double>() : std::stod(ll.get<std::string>());
  return {ThetaVec(std::move(species)), log_lik, doc.at("iterations").get<int>(), doc.at("converged").get<bool>()};
}

void write_ranked_csv(std::ostream& out, std::span<const CandidateRow> ranked, int m, std::size_t limit) {
  out << "rank";
  for (int j = 1; j <= m; ++j) out << ",M_" << j;
  for (int j = 1; j <= m; ++j) out << ",p_" << j;
  out << ",log_lik,iterations,converged\n";
  const std::size_t rows = limit == 0 ? ranked.size() : std::min(limit, ranked.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = ranked[r];
    out << r + 1;
    if (row.theta) {
      for (const auto& s : *row.theta) out << ',' << s.emitters;
      for (const auto& s : *row.theta) out << ',' << format_real(s.detect_prob);
    } else {
      for (int v : row.combo) out << ',' << v;
      for (int j = 0; j < m; ++j) out << ",nan";
    }
    out << ',' << format_real(row.log_lik) << ',' << row.iterations << ',' << (row.converged ? "true" : "false")
        << '\n';
  }
}

void write_nu_grid_csv(std::ostream& out, std::span<const NuGridCell> cells, bool with_log10) {
  out << "M,p,nu_exp" << (with_log10 ? ",log10_nu\n" : "\n");
  for (const auto& c : cells) {
    out << c.emitters << ',' << format_real(c.detect_prob) << ',' << format_real(c.nu_exp);
    if (with_log10) out << ',' << format_real(std::log10(c.nu_exp));
    out << '\n';
  }
}

void write_crlb_json(std::ostream& out, const ThetaVec& theta, const FisherMatrix& fim, const CrlbResult& bound) {
  auto matrix = [](const Eigen::MatrixXd& mat) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < mat.cols(); ++c) row.push_back(real_json(mat(r, c)));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  json doc;
  doc["theta"] = format_theta(theta);
  doc["nu"] = bound.nu;
  doc["fisher"] = matrix(fim.entries);
  doc["singular"] = bound.singular;
  doc["condition_number"] = real_json(bound.condition_number);
  if (bound.singular) {
    doc["covariance"] = nullptr;
    doc["std"] = nullptr;
  } else {
    doc["covariance"] = matrix(bound.covariance_bound);
    doc["std"] = bound.per_parameter_std;
  }
  out << doc.dump(2) << '\n';
}

}  // namespace photon_census
