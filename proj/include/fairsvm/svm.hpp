#pragma once

// Soft-margin kernel SVM trainers with group-fairness constraints.
//
// Every trainer solves
//
//   min  <w, w> + C * sum_i zeta_i
//   s.t. y_i (<w, phi(x_i)> + b) >= 1 - zeta_i,   zeta_i >= 0
//        s * <w, u_a - u_b> >= rho                 (minimum separation, optional)
//        |<w, v_a - v_b>| <= epsilon               (equal opportunity, optional)
//
// where u_g (v_g) is the feature-space barycenter of group g's negative
// (positive) samples and s = +-1 is the orientation. The problem is solved in
// its Lagrange dual; the model is the kernel expansion
//
//   f(x) = sum_i c_i k(x_i, x) + b,   c = 1/2 (alpha o y + mu s u + eta v)
//
// with u, v the barycenter weight vectors over the training samples.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairsvm/dataset.hpp"
#include "fairsvm/error.hpp"
#include "fairsvm/kernels.hpp"
#include "fairsvm/qpsolve.hpp"

namespace fairsvm {

enum class Orientation { automatic, a_minus_b, b_minus_a };

inline const char* to_string(Orientation o) {
  switch (o) {
    case Orientation::automatic: return "auto";
    case Orientation::a_minus_b: return "a_minus_b";
    case Orientation::b_minus_a: return "b_minus_a";
  }
  return "unknown";
}

inline Orientation orientation_from_string(const std::string& s) {
  if (s == "auto" || s == "automatic") return Orientation::automatic;
  if (s == "a_minus_b") return Orientation::a_minus_b;
  if (s == "b_minus_a") return Orientation::b_minus_a;
  throw InputError("unknown orientation '" + s + "'");
}

inline double orientation_sign(Orientation o) { return o == Orientation::b_minus_a ? -1.0 : 1.0; }

/// Which fairness constraints are active, and at what level.
struct FairnessSpec {
  std::optional<double> min_sep_rho;
  std::optional<double> eo_epsilon;  // +inf disables the constraint
  Label separation_label = -1;       // cell whose barycenters must stay apart
  Label opportunity_label = +1;      // cell whose barycenters must align

  void validate() const {
    if (min_sep_rho && !(*min_sep_rho > 0.0 && *min_sep_rho <= 1.0)) {
      throw InputError("minimum separation rho must lie in (0, 1]");
    }
    if (eo_epsilon && !(*eo_epsilon >= 0.0)) {
      throw InputError("equal-opportunity epsilon must be >= 0");
    }
    if ((separation_label != 1 && separation_label != -1) ||
        (opportunity_label != 1 && opportunity_label != -1)) {
      throw InputError("constraint labels must be -1 or +1");
    }
  }
};

struct TrainConfig {
  double C = 1.0;
  KernelSpec kernel;
  qp::SolverTolerances tolerances;
  Orientation orientation = Orientation::automatic;
  unsigned workers = 0;  // Gram construction threads, 0 = hardware

  void validate() const {
    if (!(C > 0.0 && std::isfinite(C))) throw InputError("C must be a positive finite number");
    kernel.validate();
  }
};

/// Barycenter difference in coefficient form: +1/n_a on group-a samples with the
/// requested label, -1/n_b on group-b samples with that label, 0 elsewhere.
struct BarycenterDirection {
  Eigen::VectorXd weights;
  Label label = -1;
  Index count_a = 0;
  Index count_b = 0;
};

inline BarycenterDirection barycenter_direction(const GroupedDataset& d, Label label) {
  d.validate();
  BarycenterDirection out;
  out.label = label;
  out.count_a = d.count(Group::a, label);
  out.count_b = d.count(Group::b, label);
  if (out.count_a == 0 || out.count_b == 0) {
    throw ConstraintUndefinedError(
        "barycenter of label " + std::to_string(label) + " is undefined: group " +
        (out.count_a == 0 ? "a" : "b") + " has no samples with that label");
  }
  out.weights = Eigen::VectorXd::Zero(d.size());
  for (Index i = 0; i < d.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (d.y[k] != label) continue;
    out.weights(i) = d.s[k] == Group::a ? 1.0 / static_cast<double>(out.count_a)
                                        : -1.0 / static_cast<double>(out.count_b);
  }
  return out;
}

struct TrainedModel {
  KernelSpec kernel;
  Index dim = 0;
  Eigen::VectorXd coefficients;  // one per training sample
  double bias = 0.0;
  double mu = 0.0;             // separation multiplier, folded into coefficients
  double eo_multiplier = 0.0;  // signed opportunity multiplier, folded likewise
  std::vector<Index> support_indices;
  Eigen::MatrixXd support_vectors;
  Eigen::VectorXd support_coefficients;
  std::string training_ref;

  std::optional<double> rho;
  std::optional<double> epsilon;
  Orientation orientation = Orientation::automatic;  // resolved when rho is set
  std::optional<double> separation_value;   // <w, u_a - u_b>
  std::optional<double> opportunity_value;  // <w, v_a - v_b>
  double objective = 0.0;                   // <w, w> + C sum zeta

  qp::QpStatus status = qp::QpStatus::optimal;
  double kkt_residual = 0.0;
  long iterations = 0;
  double solve_seconds = 0.0;
  double gram_seconds = 0.0;
};

struct Prediction {
  std::vector<Label> labels;
  Eigen::VectorXd decision;
};

struct MaxSeparation {
  double value = 0.0;  // sup |<w, u_a - u_b>| over the remaining constraints
  BindingConstraint binding = BindingConstraint::min_separation;
};

/// Supremum of |<w, u>| over w in the span of the training features subject to
/// |<w, v>| <= epsilon (when v is given). The margin constraints carry slack and
/// never bind, so the value is 0 when u vanishes in feature space, finite only
/// when u is parallel to v, and +inf otherwise.
inline MaxSeparation max_attainable_separation(const Eigen::MatrixXd& K,
                                               const Eigen::VectorXd& u,
                                               const Eigen::VectorXd* v = nullptr,
                                               double epsilon = qp::kInfinity) {
  const double scale = std::max(1.0, K.diagonal().cwiseAbs().maxCoeff());
  const Eigen::VectorXd Ku = K * u;
  const double uu = u.dot(Ku);
  if (uu <= 1e-12 * scale) return {0.0, BindingConstraint::min_separation};
  if (v == nullptr || !std::isfinite(epsilon)) {
    return {qp::kInfinity, BindingConstraint::min_separation};
  }
  const double vv = v->dot(K * *v);
  if (vv <= 1e-12 * scale) return {qp::kInfinity, BindingConstraint::min_separation};
  const double uv = v->dot(Ku);
  const double perp = uu - uv * uv / vv;
  if (perp > 1e-9 * uu) return {qp::kInfinity, BindingConstraint::joint};
  return {std::abs(uv) / vv * epsilon, BindingConstraint::joint};
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Extra dual variable attached to a direction in coefficient space.
struct DualDirection {
  Eigen::VectorXd coef;
  double linear = 0.0;  // coefficient in the minimised dual objective
  double lower = 0.0;
  double upper = qp::kInfinity;
};

inline void check_trainable(const GroupedDataset& d, const TrainConfig& cfg) {
  d.validate();
  cfg.validate();
  if (d.size() < 2) throw DegenerateProblemError("training needs at least two samples");
  if (d.count_label(1) == 0 || d.count_label(-1) == 0) {
    throw DegenerateProblemError("training data contains a single class");
  }
}

// Uses the caller's Gram when given, otherwise builds one into `owned`.
inline const Eigen::MatrixXd& training_gram(const GroupedDataset& d, const TrainConfig& cfg,
                                            const Eigen::MatrixXd* gram, Eigen::MatrixXd& owned,
                                            double& seconds) {
  if (gram != nullptr) {
    if (gram->rows() != d.size() || gram->cols() != d.size()) {
      throw InputError("precomputed Gram matrix does not match the training set");
    }
    seconds = 0.0;
    return *gram;
  }
  const auto t0 = Clock::now();
  owned = fairsvm::gram(cfg.kernel, d.x, cfg.workers);
  seconds = seconds_since(t0);
  return owned;
}

inline long default_budget(Index n) { return 200 * static_cast<long>(n) + 20000; }

/// Builds and solves the dual for the given extra directions, then assembles
/// the kernel expansion. `warm` may hold a feasible dual start.
struct DualResult {
  TrainedModel model;
  Eigen::VectorXd point;  // (alpha, extra multipliers)
};

inline DualResult solve_dual(const GroupedDataset& d, const Eigen::MatrixXd& K,
                             const TrainConfig& cfg, const std::vector<DualDirection>& extras,
                             const std::optional<Eigen::VectorXd>& warm) {
  const Index n = d.size();
  const auto m = static_cast<Index>(extras.size());
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y(i) = d.y[static_cast<std::size_t>(i)];

  qp::QpProblem p = qp::QpProblem::with_size(n + m);
  p.Q.topLeftCorner(n, n) = 0.5 * (y.asDiagonal() * K * y.asDiagonal());
  std::vector<Eigen::VectorXd> Kd;
  Kd.reserve(extras.size());
  for (const auto& ex : extras) Kd.push_back(K * ex.coef);
  for (Index k = 0; k < m; ++k) {
    const Eigen::VectorXd col = 0.5 * y.cwiseProduct(Kd[static_cast<std::size_t>(k)]);
    p.Q.block(0, n + k, n, 1) = col;
    p.Q.block(n + k, 0, 1, n) = col.transpose();
    for (Index l = 0; l < m; ++l) {
      p.Q(n + k, n + l) = 0.5 * extras[static_cast<std::size_t>(k)].coef.dot(
                                    Kd[static_cast<std::size_t>(l)]);
    }
  }
  // Exact symmetry for the extra block.
  for (Index k = 0; k < m; ++k) {
    for (Index l = 0; l < k; ++l) p.Q(n + k, n + l) = p.Q(n + l, n + k);
  }
  p.q.head(n).setConstant(-1.0);
  p.lower.head(n).setZero();
  p.upper.head(n).setConstant(cfg.C);
  for (Index k = 0; k < m; ++k) {
    const auto& ex = extras[static_cast<std::size_t>(k)];
    p.q(n + k) = ex.linear;
    p.lower(n + k) = ex.lower;
    p.upper(n + k) = ex.upper;
  }
  Eigen::RowVectorXd eq = Eigen::RowVectorXd::Zero(n + m);
  eq.head(n) = y.transpose();
  p.add_equality(eq, 0.0);

  qp::SolverTolerances tol = cfg.tolerances;
  if (!tol.max_iter) tol.max_iter = default_budget(n + m);
  qp::SolveOptions opts;
  opts.check_convexity = false;  // Q = 1/2 B'KB with K a Gram matrix
  opts.start = warm;

  const auto t0 = Clock::now();
  const qp::QpSolution sol = qp::solve(p, tol, opts);
  const double elapsed = seconds_since(t0);

  TrainedModel model;
  model.kernel = cfg.kernel;
  model.dim = d.dim();
  model.status = sol.status;
  model.kkt_residual = sol.kkt_residual;
  model.iterations = sol.iterations;
  model.solve_seconds = elapsed;

  Eigen::VectorXd c = 0.5 * sol.v.head(n).cwiseProduct(y);
  for (Index k = 0; k < m; ++k) {
    c += 0.5 * sol.v(n + k) * extras[static_cast<std::size_t>(k)].coef;
  }
  model.coefficients = c;
  model.bias = sol.eq_multipliers.size() == 1 ? sol.eq_multipliers(0) : 0.0;

  const Eigen::VectorXd f0 = K * c;
  double hinge = 0.0;
  for (Index i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - y(i) * (f0(i) + model.bias));
  model.objective = c.dot(f0) + cfg.C * hinge;
  return {std::move(model), sol.v};
}

inline void finalize(TrainedModel& model, const GroupedDataset& d) {
  model.training_ref = fingerprint(d);
  model.support_indices.clear();
  for (Index i = 0; i < model.coefficients.size(); ++i) {
    if (std::abs(model.coefficients(i)) > 1e-12) model.support_indices.push_back(i);
  }
  const auto nsv = static_cast<Index>(model.support_indices.size());
  model.support_vectors.resize(nsv, d.dim());
  model.support_coefficients.resize(nsv);
  for (Index k = 0; k < nsv; ++k) {
    const Index i = model.support_indices[static_cast<std::size_t>(k)];
    model.support_vectors.row(k) = d.x.row(i);
    model.support_coefficients(k) = model.coefficients(i);
  }
}

/// Adds <w, u> and <w, v> diagnostics when those directions are defined.
inline void record_constraint_values(TrainedModel& model, const Eigen::MatrixXd& K,
                                     const GroupedDataset& d, const FairnessSpec& spec) {
  const Eigen::VectorXd Kc = K * model.coefficients;
  const Index na = d.count(Group::a, spec.separation_label);
  const Index nb = d.count(Group::b, spec.separation_label);
  if (na > 0 && nb > 0) {
    model.separation_value = barycenter_direction(d, spec.separation_label).weights.dot(Kc);
  }
  const Index pa = d.count(Group::a, spec.opportunity_label);
  const Index pb = d.count(Group::b, spec.opportunity_label);
  if (pa > 0 && pb > 0) {
    model.opportunity_value = barycenter_direction(d, spec.opportunity_label).weights.dot(Kc);
  }
}

inline std::vector<DualDirection> opportunity_directions(const Eigen::VectorXd& v, double eps) {
  if (!std::isfinite(eps)) return {};
  if (eps == 0.0) return {{v, 0.0, -qp::kInfinity, qp::kInfinity}};
  return {{-v, eps, 0.0, qp::kInfinity}, {v, eps, 0.0, qp::kInfinity}};
}

// Signed multiplier on v from the opportunity variables stored at `offset`.
inline double opportunity_multiplier(const Eigen::VectorXd& point, Index offset,
                                     std::size_t count) {
  if (count == 1) return point(offset);
  if (count == 2) return point(offset + 1) - point(offset);
  return 0.0;
}

inline TrainedModel train_with(const GroupedDataset& d, const TrainConfig& cfg,
                               const FairnessSpec& spec, const Eigen::MatrixXd* gram);

}  // namespace detail

/// Decision values and labels (sign, with sign(0) = +1).
inline Prediction predict(const TrainedModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.dim) {
    throw InputError("predict: model expects " + std::to_string(m.dim) + " features, got " +
                     std::to_string(x.cols()));
  }
  Prediction out;
  out.decision.resize(x.rows());
  out.labels.resize(static_cast<std::size_t>(x.rows()));
  const Index nsv = m.support_vectors.rows();
  for (Index i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (Index k = 0; k < nsv; ++k) {
      acc += m.support_coefficients(k) *
             detail::kernel_unchecked(m.kernel, m.support_vectors.row(k), x.row(i));
    }
    out.decision(i) = acc + m.bias;
    out.labels[static_cast<std::size_t>(i)] = out.decision(i) >= 0.0 ? 1 : -1;
  }
  return out;
}

inline Prediction predict(const TrainedModel& m, const GroupedDataset& d) {
  return predict(m, d.x);
}

/// Decision values from a precomputed cross-Gram K(query, training set).
inline Prediction predict_from_gram(const TrainedModel& m, const Eigen::MatrixXd& cross) {
  if (cross.cols() != m.coefficients.size()) {
    throw InputError("predict_from_gram: Gram columns do not match the training set");
  }
  Prediction out;
  out.decision = (cross * m.coefficients).array() + m.bias;
  out.labels.resize(static_cast<std::size_t>(cross.rows()));
  for (Index i = 0; i < cross.rows(); ++i) {
    out.labels[static_cast<std::size_t>(i)] = out.decision(i) >= 0.0 ? 1 : -1;
  }
  return out;
}

/// Unconstrained soft-margin SVM.
inline TrainedModel train_vanilla(const GroupedDataset& d, const TrainConfig& cfg,
                                  const Eigen::MatrixXd* gram = nullptr) {
  return detail::train_with(d, cfg, FairnessSpec{}, gram);
}

/// SVM with the minimum-separation constraint s <w, u_a - u_b> >= rho.
inline TrainedModel train_min_sep(const GroupedDataset& d, const TrainConfig& cfg, double rho,
                                  const Eigen::MatrixXd* gram = nullptr,
                                  Label separation_label = -1) {
  FairnessSpec spec;
  spec.min_sep_rho = rho;
  spec.separation_label = separation_label;
  return detail::train_with(d, cfg, spec, gram);
}

/// SVM with the equal-opportunity constraint |<w, v_a - v_b>| <= epsilon.
inline TrainedModel train_eo(const GroupedDataset& d, const TrainConfig& cfg, double epsilon,
                             const Eigen::MatrixXd* gram = nullptr,
                             Label opportunity_label = +1) {
  FairnessSpec spec;
  spec.eo_epsilon = epsilon;
  spec.opportunity_label = opportunity_label;
  return detail::train_with(d, cfg, spec, gram);
}

/// Both constraints at once.
inline TrainedModel train_combined(const GroupedDataset& d, const TrainConfig& cfg,
                                   const FairnessSpec& spec,
                                   const Eigen::MatrixXd* gram = nullptr) {
  if (!spec.min_sep_rho || !spec.eo_epsilon) {
    throw InputError("train_combined needs both rho and epsilon");
  }
  return detail::train_with(d, cfg, spec, gram);
}

/// Dispatches on which constraints `spec` enables.
inline TrainedModel train(const GroupedDataset& d, const TrainConfig& cfg,
                          const FairnessSpec& spec, const Eigen::MatrixXd* gram = nullptr) {
  return detail::train_with(d, cfg, spec, gram);
}

namespace detail {

inline TrainedModel train_with(const GroupedDataset& d, const TrainConfig& cfg,
                               const FairnessSpec& spec, const Eigen::MatrixXd* gram) {
  check_trainable(d, cfg);
  spec.validate();
  double gram_seconds = 0.0;
  Eigen::MatrixXd owned;
  const Eigen::MatrixXd& K = training_gram(d, cfg, gram, owned, gram_seconds);

  const bool eo_active = spec.eo_epsilon && std::isfinite(*spec.eo_epsilon);
  const bool sep_active = spec.min_sep_rho.has_value();

  // Directions (these throw ConstraintUndefinedError on empty cells).
  std::optional<BarycenterDirection> sep_dir, eo_dir;
  if (eo_active) eo_dir = barycenter_direction(d, spec.opportunity_label);
  if (sep_active) sep_dir = barycenter_direction(d, spec.separation_label);

  std::vector<DualDirection> base_extras;
  if (eo_active) base_extras = opportunity_directions(eo_dir->weights, *spec.eo_epsilon);

  if (sep_active) {
    const MaxSeparation ms = max_attainable_separation(
        K, sep_dir->weights, eo_active ? &eo_dir->weights : nullptr,
        eo_active ? *spec.eo_epsilon : qp::kInfinity);
    if (*spec.min_sep_rho > ms.value) {
      throw InfeasibleError("minimum separation rho = " + std::to_string(*spec.min_sep_rho) +
                                " exceeds the maximum attainable separation " +
                                std::to_string(ms.value) + " (binding: " +
                                to_string(ms.binding) + ")",
                            ms.value, ms.binding);
    }
  }

  const Index n = d.size();
  // Constraints are added in stages, each warm-started from the previous
  // optimum: unconstrained, then equal opportunity, then separation. A stage
  // is skipped when the previous optimum already satisfies its constraint.
  DualResult base = solve_dual(d, K, cfg, {}, std::nullopt);
  double total_solve = base.model.solve_seconds;
  if (eo_active) {
    const Eigen::VectorXd& v = eo_dir->weights;
    if (std::abs(v.dot(K * base.model.coefficients)) > *spec.eo_epsilon) {
      Eigen::VectorXd warm = Eigen::VectorXd::Zero(base.point.size() + static_cast<Index>(base_extras.size()));
      warm.head(base.point.size()) = base.point;
      DualResult r = solve_dual(d, K, cfg, base_extras, warm);
      total_solve += r.model.solve_seconds;
      base = std::move(r);
    } else {
      base.point.conservativeResize(base.point.size() + static_cast<Index>(base_extras.size()));
      base.point.tail(static_cast<Index>(base_extras.size())).setZero();
    }
    base.model.epsilon = spec.eo_epsilon;
    base.model.eo_multiplier = opportunity_multiplier(base.point, n, base_extras.size());
  }

  auto decorate = [&](TrainedModel& model) {
    model.solve_seconds = total_solve;
    model.gram_seconds = gram_seconds;
    record_constraint_values(model, K, d, spec);
    finalize(model, d);
  };

  if (!sep_active) {
    decorate(base.model);
    return std::move(base.model);
  }

  const double rho = *spec.min_sep_rho;
  const Eigen::VectorXd& u = sep_dir->weights;
  const double base_sep = u.dot(K * base.model.coefficients);

  std::vector<Orientation> candidates;
  if (cfg.orientation == Orientation::automatic) {
    candidates = {Orientation::a_minus_b, Orientation::b_minus_a};
  } else {
    candidates = {cfg.orientation};
  }

  // Inactive constraint: the optimum without it is already feasible.
  for (Orientation o : candidates) {
    if (orientation_sign(o) * base_sep >= rho) {
      base.model.rho = rho;
      base.model.orientation = o;
      decorate(base.model);
      return std::move(base.model);
    }
  }

  // The base dual point extended with mu = 0 is feasible for each orientation.
  Eigen::VectorXd warm(base.point.size() + 1);
  warm << base.point, 0.0;

  std::optional<TrainedModel> best;
  for (Orientation o : candidates) {
    std::vector<DualDirection> extras = base_extras;
    extras.push_back({orientation_sign(o) * u, -rho, 0.0, qp::kInfinity});
    DualResult r = solve_dual(d, K, cfg, extras, warm);
    total_solve += r.model.solve_seconds;
    if (r.model.status == qp::QpStatus::unbounded) continue;
    TrainedModel& model = r.model;
    model.rho = rho;
    model.epsilon = base.model.epsilon;
    model.orientation = o;
    model.mu = r.point(r.point.size() - 1);
    model.eo_multiplier = opportunity_multiplier(r.point, n, base_extras.size());
    const double sep = u.dot(K * model.coefficients);
    const bool feasible = orientation_sign(o) * sep >= rho - cfg.tolerances.feas_tol;
    const bool usable = model.status == qp::QpStatus::optimal && feasible;
    const bool best_usable = best && best->status == qp::QpStatus::optimal &&
                             orientation_sign(best->orientation) * *best->separation_value >=
                                 rho - cfg.tolerances.feas_tol;
    model.separation_value = sep;
    if (!best || (usable && (!best_usable || model.objective < best->objective))) {
      best = std::move(model);
    }
  }
  if (!best) {
    throw InfeasibleError("minimum separation constraint is infeasible (dual unbounded)", 0.0,
                          eo_active ? BindingConstraint::joint
                                    : BindingConstraint::min_separation);
  }
  decorate(*best);
  return std::move(*best);
}

}  // namespace detail

/// Objective <w, w> + C sum hinge of an arbitrary expansion on its training Gram.
inline double primal_objective(const Eigen::MatrixXd& K, const std::vector<Label>& y,
                               const Eigen::VectorXd& c, double bias, double C) {
  const Eigen::VectorXd f0 = K * c;
  double hinge = 0.0;
  for (Index i = 0; i < f0.size(); ++i) {
    hinge += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * (f0(i) + bias));
  }
  return c.dot(f0) + C * hinge;
}

}  // namespace fairsvm
