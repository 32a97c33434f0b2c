#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "fairsvm/dataset.hpp"
#include "fairsvm/error.hpp"

namespace fairsvm {

enum class KernelFamily { linear, rbf, polynomial };

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::polynomial: return "polynomial";
  }
  return "unknown";
}

inline KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "polynomial" || name == "poly") return KernelFamily::polynomial;
  throw InputError("unknown kernel family '" + name + "'");
}

/// Kernel family and parameters.
///
///   linear      k(x, y) = <x, y>
///   rbf         k(x, y) = exp(-gamma * |x - y|^2)
///   polynomial  k(x, y) = (gamma * <x, y> + coef0)^degree
struct KernelSpec {
  KernelFamily family = KernelFamily::rbf;
  double gamma = 1.0;
  int degree = 3;
  double coef0 = 1.0;

  static KernelSpec linear() { return {KernelFamily::linear, 1.0, 1, 0.0}; }
  static KernelSpec rbf(double gamma) { return {KernelFamily::rbf, gamma, 1, 0.0}; }
  static KernelSpec polynomial(int degree, double gamma = 1.0, double coef0 = 1.0) {
    return {KernelFamily::polynomial, gamma, degree, coef0};
  }

  void validate() const {
    if (family == KernelFamily::rbf && !(gamma > 0.0 && std::isfinite(gamma))) {
      throw InputError("rbf kernel requires gamma > 0");
    }
    if (family == KernelFamily::polynomial) {
      if (degree < 1) throw InputError("polynomial kernel requires degree >= 1");
      if (!(gamma > 0.0)) throw InputError("polynomial kernel requires gamma > 0");
      // Negative offsets make the kernel indefinite.
      if (!(coef0 >= 0.0)) throw InputError("polynomial kernel requires coef0 >= 0");
    }
  }

  bool operator==(const KernelSpec&) const = default;
};

namespace detail {

template <typename A, typename B>
double kernel_unchecked(const KernelSpec& spec, const A& x, const B& y) {
  double acc = 0.0;
  if (spec.family == KernelFamily::rbf) {
    for (Index k = 0; k < x.size(); ++k) {
      const double diff = x[k] - y[k];
      acc += diff * diff;
    }
    return std::exp(-spec.gamma * acc);
  }
  for (Index k = 0; k < x.size(); ++k) acc += x[k] * y[k];
  if (spec.family == KernelFamily::linear) return acc;
  return std::pow(spec.gamma * acc + spec.coef0, spec.degree);
}

inline unsigned resolve_workers(unsigned workers, Index rows) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<Index>(1, std::min<Index>(workers, rows)));
}

// Runs body(row) for all rows, split across `workers` threads. Rows are
// assigned round-robin so triangular workloads stay balanced.
template <typename Body>
void parallel_rows(Index rows, unsigned workers, Body body) {
  workers = resolve_workers(workers, rows);
  if (workers <= 1) {
    for (Index i = 0; i < rows; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index i = w; i < rows; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// k(x, y). Throws InputError on dimension mismatch.
template <typename A, typename B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x,
                   const Eigen::MatrixBase<B>& y) {
  if (x.size() != y.size()) {
    throw InputError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
  }
  return detail::kernel_unchecked(spec, x.derived(), y.derived());
}

/// Pairwise kernel values with the identities of the row/column datasets.
struct GramMatrix {
  Eigen::MatrixXd values;
  std::string row_source;
  std::string col_source;

  bool is_self() const { return row_source == col_source; }
};

/// Self-Gram of the rows of `x`. Upper triangle is computed and mirrored, so
/// the result is exactly symmetric. Output does not depend on `workers`.
inline Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& x,
                            unsigned workers = 0) {
  spec.validate();
  const Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  detail::parallel_rows(n, workers, [&](Index i) {
    for (Index j = i; j < n; ++j) {
      k(i, j) = detail::kernel_unchecked(spec, x.row(i), x.row(j));
    }
  });
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) k(i, j) = k(j, i);
  }
  return k;
}

/// Cross-Gram: values(i, j) = k(rows_i, cols_j).
inline Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& rows,
                            const Eigen::MatrixXd& cols, unsigned workers = 0) {
  spec.validate();
  if (rows.cols() != cols.cols()) {
    throw InputError("gram: feature dimensions differ (" + std::to_string(rows.cols()) +
                     " vs " + std::to_string(cols.cols()) + ")");
  }
  Eigen::MatrixXd k(rows.rows(), cols.rows());
  detail::parallel_rows(rows.rows(), workers, [&](Index i) {
    for (Index j = 0; j < cols.rows(); ++j) {
      k(i, j) = detail::kernel_unchecked(spec, rows.row(i), cols.row(j));
    }
  });
  return k;
}

/// Gram matrix between two datasets, tagged with their fingerprints.
inline GramMatrix gram(const KernelSpec& spec, const GroupedDataset& rows,
                       const GroupedDataset& cols, unsigned workers = 0) {
  GramMatrix out;
  out.row_source = fingerprint(rows);
  out.col_source = &rows == &cols ? out.row_source : fingerprint(cols);
  if (out.row_source == out.col_source) {
    out.values = gram(spec, rows.x, workers);
  } else {
    out.values = gram(spec, rows.x, cols.x, workers);
  }
  return out;
}

}  // namespace fairsvm
