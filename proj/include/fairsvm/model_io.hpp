#pragma once

// Plain-text model files. One "key value..." record per line:
//
//   fairsvm-model 1
//   kernel rbf
//   gamma 0.5
//   degree 1
//   coef0 0
//   dim 3
//   bias -0.1234
//   mu 0
//   eo_multiplier 0
//   rho 0.1            (or "none")
//   epsilon none
//   orientation a_minus_b
//   separation_value 0.25
//   opportunity_value none
//   objective 12.5
//   status optimal
//   kkt_residual 1e-9
//   iterations 42
//   training_ref 0123456789abcdef
//   coefficients <n> c_1 ... c_n
//   support <count>
//   sv <index> <coefficient> <x_1> ... <x_dim>     (count lines)
//   end
//
// Reals are written with 17 significant digits, so a save/load round trip
// reproduces every double exactly.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "fairsvm/svm.hpp"

namespace fairsvm {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& token, const std::string& what) {
  if (token == "inf") return qp::kInfinity;
  if (token == "-inf") return -qp::kInfinity;
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || token.empty()) {
    throw InputError("model file: bad number '" + token + "' for " + what);
  }
  return v;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_real(*v) : "none";
}

inline std::optional<double> parse_optional(const std::string& token, const std::string& what) {
  if (token == "none") return std::nullopt;
  return parse_real(token, what);
}

inline qp::QpStatus status_from_string(const std::string& s) {
  if (s == "optimal") return qp::QpStatus::optimal;
  if (s == "infeasible") return qp::QpStatus::infeasible;
  if (s == "max_iter") return qp::QpStatus::max_iter;
  if (s == "unbounded") return qp::QpStatus::unbounded;
  throw InputError("model file: unknown status '" + s + "'");
}

}  // namespace detail

inline void save_model(const TrainedModel& m, std::ostream& out) {
  using detail::format_optional;
  using detail::format_real;
  out << "fairsvm-model " << kModelFormatVersion << '\n'
      << "kernel " << to_string(m.kernel.family) << '\n'
      << "gamma " << format_real(m.kernel.gamma) << '\n'
      << "degree " << m.kernel.degree << '\n'
      << "coef0 " << format_real(m.kernel.coef0) << '\n'
      << "dim " << m.dim << '\n'
      << "bias " << format_real(m.bias) << '\n'
      << "mu " << format_real(m.mu) << '\n'
      << "eo_multiplier " << format_real(m.eo_multiplier) << '\n'
      << "rho " << format_optional(m.rho) << '\n'
      << "epsilon " << format_optional(m.epsilon) << '\n'
      << "orientation " << to_string(m.orientation) << '\n'
      << "separation_value " << format_optional(m.separation_value) << '\n'
      << "opportunity_value " << format_optional(m.opportunity_value) << '\n'
      << "objective " << format_real(m.objective) << '\n'
      << "status " << to_string(m.status) << '\n'
      << "kkt_residual " << format_real(m.kkt_residual) << '\n'
      << "iterations " << m.iterations << '\n'
      << "training_ref " << (m.training_ref.empty() ? "none" : m.training_ref) << '\n';
  out << "coefficients " << m.coefficients.size();
  for (Index i = 0; i < m.coefficients.size(); ++i) out << ' ' << format_real(m.coefficients(i));
  out << '\n';
  out << "support " << m.support_vectors.rows() << '\n';
  for (Index k = 0; k < m.support_vectors.rows(); ++k) {
    out << "sv " << m.support_indices[static_cast<std::size_t>(k)] << ' '
        << format_real(m.support_coefficients(k));
    for (Index j = 0; j < m.support_vectors.cols(); ++j) {
      out << ' ' << format_real(m.support_vectors(k, j));
    }
    out << '\n';
  }
  out << "end\n";
}

inline TrainedModel load_model(std::istream& in) {
  using detail::parse_optional;
  using detail::parse_real;
  std::string line;
  if (!std::getline(in, line)) throw InputError("model file is empty");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != "fairsvm-model") throw InputError("not a fairsvm model file");
    if (version != kModelFormatVersion) {
      throw InputError("unsupported model format version " + std::to_string(version));
    }
  }

  TrainedModel m;
  std::map<std::string, std::string> scalars;
  Index expected_support = -1;
  std::vector<std::vector<double>> sv_rows;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "end") {
      ended = true;
      break;
    }
    if (key == "coefficients") {
      Index n = 0;
      ls >> n;
      m.coefficients.resize(n);
      std::string tok;
      for (Index i = 0; i < n; ++i) {
        if (!(ls >> tok)) throw InputError("model file: truncated coefficients");
        m.coefficients(i) = parse_real(tok, "coefficient");
      }
      continue;
    }
    if (key == "support") {
      ls >> expected_support;
      continue;
    }
    if (key == "sv") {
      std::vector<double> row;
      std::string tok;
      Index idx = 0;
      ls >> idx;
      m.support_indices.push_back(idx);
      while (ls >> tok) row.push_back(parse_real(tok, "support vector"));
      sv_rows.push_back(std::move(row));
      continue;
    }
    std::string value;
    ls >> value;
    scalars[key] = value;
  }
  if (!ended) throw InputError("model file: missing 'end' record");

  auto get = [&](const std::string& key) -> const std::string& {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw InputError("model file: missing '" + key + "'");
    return it->second;
  };
  m.kernel.family = kernel_family_from_string(get("kernel"));
  m.kernel.gamma = parse_real(get("gamma"), "gamma");
  m.kernel.degree = std::stoi(get("degree"));
  m.kernel.coef0 = parse_real(get("coef0"), "coef0");
  m.kernel.validate();
  m.dim = std::stol(get("dim"));
  m.bias = parse_real(get("bias"), "bias");
  m.mu = parse_real(get("mu"), "mu");
  m.eo_multiplier = parse_real(get("eo_multiplier"), "eo_multiplier");
  m.rho = parse_optional(get("rho"), "rho");
  m.epsilon = parse_optional(get("epsilon"), "epsilon");
  m.orientation = orientation_from_string(get("orientation"));
  m.separation_value = parse_optional(get("separation_value"), "separation_value");
  m.opportunity_value = parse_optional(get("opportunity_value"), "opportunity_value");
  m.objective = parse_real(get("objective"), "objective");
  m.status = detail::status_from_string(get("status"));
  m.kkt_residual = parse_real(get("kkt_residual"), "kkt_residual");
  m.iterations = std::stol(get("iterations"));
  m.training_ref = get("training_ref") == "none" ? "" : get("training_ref");

  const auto nsv = static_cast<Index>(sv_rows.size());
  if (expected_support != nsv) throw InputError("model file: support vector count mismatch");
  m.support_vectors.resize(nsv, m.dim);
  m.support_coefficients.resize(nsv);
  for (Index k = 0; k < nsv; ++k) {
    const auto& row = sv_rows[static_cast<std::size_t>(k)];
    if (static_cast<Index>(row.size()) != m.dim + 1) {
      throw InputError("model file: support vector " + std::to_string(k) + " has wrong width");
    }
    m.support_coefficients(k) = row[0];
    for (Index j = 0; j < m.dim; ++j) m.support_vectors(k, j) = row[static_cast<std::size_t>(j + 1)];
  }
  return m;
}

inline void save_model(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_model(m, out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace fairsvm
