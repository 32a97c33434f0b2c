#pragma once

// Dense convex quadratic programming.
//
//   minimize    1/2 v'Qv + q'v
//   subject to  lower <= v <= upper,  A v <= b,  E v = e
//
// Two algorithms sit behind solve():
//   * a Mehrotra predictor-corrector interior-point method for the general
//     problem (small to medium n, dense KKT factorisation);
//   * a pairwise decomposition method (SMO-style, second-order working set
//     selection) for problems with only box constraints and at most one
//     equality row with coefficients in {-1, 0, +1}. Variables with a zero
//     equality coefficient are updated one coordinate at a time. This is the
//     shape of every kernel SVM dual, and it scales to thousands of variables.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairsvm/error.hpp"

namespace fairsvm::qp {

using Index = Eigen::Index;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd A;  // inequality rows, A v <= b
  Eigen::VectorXd b;
  Eigen::MatrixXd E;  // equality rows, E v = e
  Eigen::VectorXd e;

  /// Zero objective, unbounded box, no general constraints.
  static QpProblem with_size(Index n) {
    QpProblem p;
    p.Q = Eigen::MatrixXd::Zero(n, n);
    p.q = Eigen::VectorXd::Zero(n);
    p.lower = Eigen::VectorXd::Constant(n, -kInfinity);
    p.upper = Eigen::VectorXd::Constant(n, kInfinity);
    p.A.resize(0, n);
    p.b.resize(0);
    p.E.resize(0, n);
    p.e.resize(0);
    return p;
  }

  Index size() const { return q.size(); }

  void add_inequality(const Eigen::RowVectorXd& row, double rhs) {
    A.conservativeResize(A.rows() + 1, size());
    A.row(A.rows() - 1) = row;
    b.conservativeResize(b.size() + 1);
    b(b.size() - 1) = rhs;
  }

  void add_equality(const Eigen::RowVectorXd& row, double rhs) {
    E.conservativeResize(E.rows() + 1, size());
    E.row(E.rows() - 1) = row;
    e.conservativeResize(e.size() + 1);
    e(e.size() - 1) = rhs;
  }
};

struct SolverTolerances {
  double feas_tol = 1e-6;
  double kkt_tol = 1e-6;
  double opt_tol = 1e-6;
  std::optional<long> max_iter;  // default 10 n + 1000

  long iteration_budget(Index n) const {
    return max_iter.value_or(10 * static_cast<long>(n) + 1000);
  }
};

enum class QpStatus { optimal, infeasible, max_iter, unbounded };
enum class QpMethod { interior_point, decomposition };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

inline const char* to_string(QpMethod m) {
  return m == QpMethod::interior_point ? "interior_point" : "decomposition";
}

/// Primal point plus Lagrange multipliers for
///   L = f(v) + ineq'(Av - b) + eq'(Ev - e) - lower'(v - l) + upper'(v - u).
struct QpSolution {
  Eigen::VectorXd v;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iter;
  double kkt_residual = kInfinity;
  double constraint_violation = kInfinity;
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd lower_multipliers;
  Eigen::VectorXd upper_multipliers;
  long iterations = 0;
  double regularization = 0.0;  // diagonal shift applied to Q
  QpMethod method = QpMethod::interior_point;
};

struct KktReport {
  double stationarity = 0.0;
  double primal_violation = 0.0;
  double dual_violation = 0.0;
  double complementarity = 0.0;

  /// Worst of the dual-side residuals (everything except primal feasibility).
  double kkt_residual() const {
    return std::max({stationarity, dual_violation, complementarity});
  }
};

struct SolveOptions {
  std::optional<Eigen::VectorXd> start;  // optional initial point
  bool check_convexity = true;           // eigenvalue test on Q
  bool allow_decomposition = true;
};

inline double objective_value(const QpProblem& p, const Eigen::VectorXd& v) {
  return 0.5 * v.dot(p.Q * v) + p.q.dot(v);
}

/// Largest violation of any constraint at v (0 when feasible).
inline double constraint_violation(const QpProblem& p, const Eigen::VectorXd& v) {
  double worst = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    worst = std::max({worst, p.lower(i) - v(i), v(i) - p.upper(i)});
  }
  if (p.A.rows() > 0) {
    const Eigen::VectorXd r = p.A * v - p.b;
    worst = std::max(worst, r.maxCoeff());
  }
  if (p.E.rows() > 0) {
    worst = std::max(worst, (p.E * v - p.e).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// KKT residuals of a candidate solution using its stored multipliers. Missing
/// multiplier vectors are treated as zero. Pure diagnostic.
inline KktReport verify_kkt(const QpProblem& p, const QpSolution& s) {
  const Index n = p.size();
  KktReport r;
  if (s.v.size() != n) {
    r.stationarity = r.primal_violation = r.dual_violation = r.complementarity = kInfinity;
    return r;
  }
  auto or_zero = [](const Eigen::VectorXd& m, Index size) {
    return m.size() == size ? m : Eigen::VectorXd::Zero(size);
  };
  const Eigen::VectorXd lam = or_zero(s.ineq_multipliers, p.A.rows());
  const Eigen::VectorXd nu = or_zero(s.eq_multipliers, p.E.rows());
  const Eigen::VectorXd zl = or_zero(s.lower_multipliers, n);
  const Eigen::VectorXd zu = or_zero(s.upper_multipliers, n);

  Eigen::VectorXd grad = p.Q * s.v + p.q - zl + zu;
  if (p.A.rows() > 0) grad += p.A.transpose() * lam;
  if (p.E.rows() > 0) grad += p.E.transpose() * nu;
  r.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  r.primal_violation = constraint_violation(p, s.v);

  for (Index i = 0; i < lam.size(); ++i) {
    r.dual_violation = std::max(r.dual_violation, -lam(i));
    const double slack = p.b(i) - p.A.row(i).dot(s.v);
    r.complementarity = std::max(r.complementarity, std::abs(lam(i) * slack));
  }
  for (Index i = 0; i < n; ++i) {
    r.dual_violation = std::max({r.dual_violation, -zl(i), -zu(i)});
    if (std::isfinite(p.lower(i))) {
      r.complementarity =
          std::max(r.complementarity, std::abs(zl(i) * (s.v(i) - p.lower(i))));
    } else {
      r.dual_violation = std::max(r.dual_violation, std::abs(zl(i)));
    }
    if (std::isfinite(p.upper(i))) {
      r.complementarity =
          std::max(r.complementarity, std::abs(zu(i) * (p.upper(i) - s.v(i))));
    } else {
      r.dual_violation = std::max(r.dual_violation, std::abs(zu(i)));
    }
  }
  return r;
}

namespace detail {

inline constexpr double kRegularization = 1e-10;

inline void validate(const QpProblem& p, bool check_convexity) {
  const Index n = p.size();
  auto fail = [](const std::string& msg) { throw InputError("qp: " + msg); };
  if (p.Q.rows() != n || p.Q.cols() != n) fail("Q must be n x n");
  if (p.lower.size() != n || p.upper.size() != n) fail("bounds must have length n");
  if (p.A.cols() != n && p.A.rows() > 0) fail("A must have n columns");
  if (p.A.rows() != p.b.size()) fail("A and b disagree in row count");
  if (p.E.cols() != n && p.E.rows() > 0) fail("E must have n columns");
  if (p.E.rows() != p.e.size()) fail("E and e disagree in row count");
  if (!p.Q.allFinite() || !p.q.allFinite()) fail("objective has non-finite entries");
  if ((p.A.rows() > 0 && (!p.A.allFinite() || !p.b.allFinite())) ||
      (p.E.rows() > 0 && (!p.E.allFinite() || !p.e.allFinite()))) {
    fail("constraints have non-finite entries");
  }
  for (Index i = 0; i < n; ++i) {
    if (std::isnan(p.lower(i)) || std::isnan(p.upper(i))) fail("NaN bound");
    if (p.lower(i) > p.upper(i)) fail("lower bound exceeds upper bound at " + std::to_string(i));
  }
  if (n == 0) return;
  const double scale = std::max(1.0, p.Q.cwiseAbs().maxCoeff());
  if ((p.Q - p.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) fail("Q is not symmetric");
  if (check_convexity) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.Q, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
      fail("Q is not positive semidefinite (min eigenvalue " +
           std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
  }
}

inline bool decomposable(const QpProblem& p) {
  if (p.A.rows() > 0 || p.E.rows() > 1) return false;
  if (p.E.rows() == 1) {
    for (Index i = 0; i < p.size(); ++i) {
      const double a = p.E(0, i);
      if (a != 0.0 && a != 1.0 && a != -1.0) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Pairwise decomposition
// ---------------------------------------------------------------------------

class Decomposition {
 public:
  Decomposition(const QpProblem& p, const SolverTolerances& tol)
      : p_(p), tol_(tol), n_(p.size()) {
    a_ = p.E.rows() == 1 ? Eigen::VectorXd(p.E.row(0).transpose())
                         : Eigen::VectorXd::Zero(n_);
    target_ = p.E.rows() == 1 ? p.e(0) : 0.0;
  }

  QpSolution run(const std::optional<Eigen::VectorXd>& start) {
    QpSolution sol;
    sol.method = QpMethod::decomposition;
    if (!initial_point(start)) {
      sol.v = v_;
      sol.status = QpStatus::infeasible;
      sol.objective = objective_value(p_, v_);
      sol.constraint_violation = constraint_violation(p_, v_);
      return sol;
    }
    g_ = p_.Q * v_ + p_.q;

    const long budget = tol_.iteration_budget(n_);
    const long refresh = std::max<long>(1000, 10 * static_cast<long>(n_));
    long iter = 0;
    QpStatus status = QpStatus::max_iter;
    while (true) {
      const Violation viol = scan();
      if (std::max(viol.gap, viol.single) <= tol_.kkt_tol) {
        // Accumulated rounding in g can fake convergence; confirm on a fresh gradient.
        g_ = p_.Q * v_ + p_.q;
        const Violation fresh = scan();
        if (std::max(fresh.gap, fresh.single) <= tol_.kkt_tol) {
          status = QpStatus::optimal;
          break;
        }
        continue;
      }
      if (iter >= budget) break;
      ++iter;
      const bool ok = viol.gap >= viol.single ? pair_step(viol) : single_step(viol.k);
      if (!ok) {
        status = QpStatus::unbounded;
        break;
      }
      if (iter % refresh == 0) g_ = p_.Q * v_ + p_.q;
    }

    g_ = p_.Q * v_ + p_.q;
    sol.v = v_;
    sol.status = status;
    sol.iterations = iter;
    sol.objective = objective_value(p_, v_);
    fill_multipliers(sol);
    const KktReport rep = verify_kkt(p_, sol);
    sol.kkt_residual = rep.kkt_residual();
    sol.constraint_violation = rep.primal_violation;
    return sol;
  }

 private:
  struct Violation {
    double gap = 0.0;     // m - M over the equality-coupled variables
    double single = 0.0;  // worst violation among uncoupled variables
    double m = -kInfinity, M = kInfinity;
    Index i = -1, j = -1, k = -1;
  };

  bool in_up(Index i) const {
    return a_(i) > 0 ? v_(i) < p_.upper(i) : v_(i) > p_.lower(i);
  }
  bool in_low(Index i) const {
    return a_(i) > 0 ? v_(i) > p_.lower(i) : v_(i) < p_.upper(i);
  }

  bool initial_point(const std::optional<Eigen::VectorXd>& start) {
    if (start && start->size() == n_) {
      v_ = *start;
      if (constraint_violation(p_, v_) <= tol_.feas_tol) {
        v_ = v_.cwiseMax(p_.lower).cwiseMin(p_.upper);
        return true;
      }
    }
    v_ = Eigen::VectorXd::Zero(n_).cwiseMax(p_.lower).cwiseMin(p_.upper);
    double residual = target_ - a_.dot(v_);
    for (Index i = 0; i < n_ && std::abs(residual) > 0.0; ++i) {
      if (a_(i) == 0.0) continue;
      const double wanted = v_(i) + residual / a_(i);
      const double moved = std::clamp(wanted, p_.lower(i), p_.upper(i));
      residual -= a_(i) * (moved - v_(i));
      v_(i) = moved;
    }
    return std::abs(target_ - a_.dot(v_)) <= tol_.feas_tol;
  }

  Violation scan() const {
    Violation out;
    for (Index t = 0; t < n_; ++t) {
      if (a_(t) != 0.0) {
        const double val = -a_(t) * g_(t);
        if (in_up(t) && val > out.m) {
          out.m = val;
          out.i = t;
        }
        if (in_low(t) && val < out.M) {
          out.M = val;
          out.j = t;
        }
      } else {
        double viol = 0.0;
        if (v_(t) < p_.upper(t) && g_(t) < 0.0) viol = -g_(t);
        if (v_(t) > p_.lower(t) && g_(t) > 0.0) viol = g_(t);
        if (viol > out.single) {
          out.single = viol;
          out.k = t;
        }
      }
    }
    if (out.i >= 0 && out.j >= 0) out.gap = std::max(0.0, out.m - out.M);
    return out;
  }

  bool pair_step(const Violation& viol) {
    const Index i = viol.i;
    const double qii = p_.Q(i, i);
    // Second-order choice of the partner.
    Index j = -1;
    double best = -kInfinity;
    for (Index t = 0; t < n_; ++t) {
      if (a_(t) == 0.0 || !in_low(t)) continue;
      const double val = -a_(t) * g_(t);
      const double bij = viol.m - val;
      if (bij <= 0.0) continue;
      double eta = qii + p_.Q(t, t) - 2.0 * a_(i) * a_(t) * p_.Q(i, t);
      if (eta <= 0.0) eta = 1e-12;
      const double score = bij * bij / eta;
      if (score > best) {
        best = score;
        j = t;
      }
    }
    if (j < 0) j = viol.j;

    const double ai = a_(i), aj = a_(j);
    const double slope = viol.m + aj * g_(j);  // -d/dt of the objective at t = 0
    const double eta = qii + p_.Q(j, j) - 2.0 * ai * aj * p_.Q(i, j);
    const double cap_i = ai > 0 ? p_.upper(i) - v_(i) : v_(i) - p_.lower(i);
    const double cap_j = aj > 0 ? v_(j) - p_.lower(j) : p_.upper(j) - v_(j);
    const double t_max = std::min(cap_i, cap_j);
    double t = eta > 1e-15 ? slope / eta : kInfinity;
    if (!std::isfinite(std::min(t, t_max))) return false;
    if (t >= t_max) t = t_max;
    if (!(t > 0.0)) {
      // Stalled on a degenerate pair: nudge by clamping to a bound instead.
      t = std::max(t, 0.0);
    }

    const double di = ai * t, dj = -aj * t;
    v_(i) += di;
    v_(j) += dj;
    if (t == cap_i) v_(i) = ai > 0 ? p_.upper(i) : p_.lower(i);
    if (t == cap_j) v_(j) = aj > 0 ? p_.lower(j) : p_.upper(j);
    g_.noalias() += p_.Q.col(i) * di + p_.Q.col(j) * dj;
    return true;
  }

  bool single_step(Index k) {
    const double qkk = p_.Q(k, k);
    double t = qkk > 1e-15 ? -g_(k) / qkk : (g_(k) < 0 ? kInfinity : -kInfinity);
    const double lo = p_.lower(k) - v_(k), hi = p_.upper(k) - v_(k);
    t = std::clamp(t, lo, hi);
    if (!std::isfinite(t)) return false;
    v_(k) += t;
    if (t == lo) v_(k) = p_.lower(k);
    if (t == hi) v_(k) = p_.upper(k);
    g_.noalias() += p_.Q.col(k) * t;
    return true;
  }

  void fill_multipliers(QpSolution& sol) const {
    double nu = 0.0;
    if (p_.E.rows() == 1) {
      double sum = 0.0;
      Index free_count = 0;
      double m = -kInfinity, M = kInfinity;
      for (Index t = 0; t < n_; ++t) {
        if (a_(t) == 0.0) continue;
        const double val = -a_(t) * g_(t);
        const bool up = in_up(t), low = in_low(t);
        if (up && low) {
          sum += val;
          ++free_count;
        }
        if (up) m = std::max(m, val);
        if (low) M = std::min(M, val);
      }
      if (free_count > 0) {
        nu = sum / static_cast<double>(free_count);
      } else if (std::isfinite(m) && std::isfinite(M)) {
        nu = 0.5 * (m + M);
      } else if (std::isfinite(m)) {
        nu = m;
      } else if (std::isfinite(M)) {
        nu = M;
      }
      sol.eq_multipliers = Eigen::VectorXd::Constant(1, nu);
    } else {
      sol.eq_multipliers.resize(0);
    }
    sol.ineq_multipliers.resize(0);
    sol.lower_multipliers = Eigen::VectorXd::Zero(n_);
    sol.upper_multipliers = Eigen::VectorXd::Zero(n_);
    for (Index t = 0; t < n_; ++t) {
      const double r = g_(t) + a_(t) * nu;
      const bool at_lower = v_(t) <= p_.lower(t);
      const bool at_upper = v_(t) >= p_.upper(t);
      if (at_lower && r > 0.0) sol.lower_multipliers(t) = r;
      if (at_upper && r < 0.0) sol.upper_multipliers(t) = -r;
    }
  }

  const QpProblem& p_;
  const SolverTolerances& tol_;
  Index n_;
  Eigen::VectorXd a_;
  double target_ = 0.0;
  Eigen::VectorXd v_;
  Eigen::VectorXd g_;
};

// ---------------------------------------------------------------------------
// Interior point
// ---------------------------------------------------------------------------

// Inequalities (general rows and finite bounds) stacked as G v <= h.
struct StackedInequalities {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  // Row origin: 0 = general row, 1 = lower bound, 2 = upper bound; plus index.
  std::vector<std::pair<int, Index>> origin;
};

inline StackedInequalities stack_inequalities(const QpProblem& p) {
  const Index n = p.size();
  Index rows = p.A.rows();
  for (Index i = 0; i < n; ++i) {
    rows += std::isfinite(p.lower(i)) + std::isfinite(p.upper(i));
  }
  StackedInequalities s;
  s.G = Eigen::MatrixXd::Zero(rows, n);
  s.h.resize(rows);
  Index r = 0;
  for (Index i = 0; i < p.A.rows(); ++i, ++r) {
    s.G.row(r) = p.A.row(i);
    s.h(r) = p.b(i);
    s.origin.emplace_back(0, i);
  }
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(p.lower(i))) {
      s.G(r, i) = -1.0;
      s.h(r) = -p.lower(i);
      s.origin.emplace_back(1, i);
      ++r;
    }
    if (std::isfinite(p.upper(i))) {
      s.G(r, i) = 1.0;
      s.h(r) = p.upper(i);
      s.origin.emplace_back(2, i);
      ++r;
    }
  }
  return s;
}

inline void scatter_multipliers(const QpProblem& p, const StackedInequalities& st,
                                const Eigen::VectorXd& z, QpSolution& sol) {
  sol.ineq_multipliers = Eigen::VectorXd::Zero(p.A.rows());
  sol.lower_multipliers = Eigen::VectorXd::Zero(p.size());
  sol.upper_multipliers = Eigen::VectorXd::Zero(p.size());
  for (std::size_t r = 0; r < st.origin.size(); ++r) {
    const auto [kind, idx] = st.origin[r];
    const double val = z(static_cast<Index>(r));
    if (kind == 0) sol.ineq_multipliers(idx) = val;
    if (kind == 1) sol.lower_multipliers(idx) = val;
    if (kind == 2) sol.upper_multipliers(idx) = val;
  }
}

inline double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double alpha = 1.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) alpha = std::min(alpha, -x(i) / dx(i));
  }
  return alpha;
}

inline QpSolution interior_point(const QpProblem& p, const SolverTolerances& tol,
                                 const std::optional<Eigen::VectorXd>& start) {
  const Index n = p.size();
  const Index neq = p.E.rows();
  const StackedInequalities st = stack_inequalities(p);
  const Index m = st.G.rows();
  const long budget = tol.iteration_budget(n);

  QpSolution sol;
  sol.method = QpMethod::interior_point;
  sol.regularization = kRegularization;

  Eigen::VectorXd x = (start && start->size() == n) ? *start : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(neq);
  Eigen::VectorXd s = (st.h - st.G * x).cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);

  const Eigen::MatrixXd Et = p.E.transpose();
  const Eigen::MatrixXd Gt = st.G.transpose();

  auto finish = [&](QpStatus status, long iters) {
    sol.v = x;
    sol.iterations = iters;
    sol.status = status;
    sol.eq_multipliers = y;
    scatter_multipliers(p, st, z, sol);
    sol.objective = objective_value(p, x);
    const KktReport rep = verify_kkt(p, sol);
    sol.kkt_residual = rep.kkt_residual();
    sol.constraint_violation = rep.primal_violation;
    return sol;
  };

  // Progress measure: stationarity relative to the gradient magnitude, primal
  // violation, and duality gap relative to the objective. Zero at an optimum.
  // Acceptance itself uses the absolute tolerances.
  auto merit = [&](bool& ok) {
    QpSolution probe;
    probe.v = x;
    probe.eq_multipliers = y;
    scatter_multipliers(p, st, z, probe);
    const KktReport rep = verify_kkt(p, probe);
    const double grad_scale =
        1.0 + std::max(p.q.cwiseAbs().maxCoeff(), (p.Q * x).cwiseAbs().maxCoeff());
    const double stat = rep.kkt_residual() / grad_scale;
    const double gap = (m > 0 ? s.dot(z) : 0.0) / (1.0 + std::abs(objective_value(p, x)));
    ok = rep.primal_violation <= 0.1 * tol.feas_tol && rep.kkt_residual() <= tol.kkt_tol &&
         gap <= 0.1 * tol.opt_tol;
    const double value = std::max({stat, rep.primal_violation, gap});
    return std::isfinite(value) ? value : kInfinity;
  };

  struct Iterate {
    Eigen::VectorXd x, y, s, z;
    double merit = kInfinity;
    bool ok = false;
  } best;
  long since_best = 0;
  constexpr long kStall = 25;

  Eigen::MatrixXd kkt(n + neq, n + neq);
  long iterations = 0;
  for (long it = 0; it <= budget; ++it) {
    iterations = it;
    const Eigen::VectorXd rd = p.Q * x + p.q + Gt * z + Et * y;
    const Eigen::VectorXd rp = st.G * x + s - st.h;
    const Eigen::VectorXd re = p.E * x - p.e;

    bool ok = false;
    const double current = merit(ok);
    if (ok) return finish(QpStatus::optimal, it);
    since_best = current < 0.5 * best.merit ? 0 : since_best + 1;
    if (current < best.merit) best = {x, y, s, z, current, ok};
    // Past the attainable accuracy the scaled system degrades; keep the best.
    if (since_best > kStall || it == budget) break;

    const Eigen::VectorXd w = z.cwiseQuotient(s);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = p.Q + Gt * w.asDiagonal() * st.G;
    kkt.topLeftCorner(n, n).diagonal().array() += kRegularization;
    if (neq > 0) {
      kkt.topRightCorner(n, neq) = Et;
      kkt.bottomLeftCorner(neq, n) = p.E;
      kkt.bottomRightCorner(neq, neq).diagonal().array() = -kRegularization;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

    auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                      Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
      Eigen::VectorXd rhs(n + neq);
      rhs.head(n) = -rd - Gt * (z.cwiseProduct(rp) - rc).cwiseQuotient(s);
      if (neq > 0) rhs.tail(neq) = -re;
      const Eigen::VectorXd sol_vec = lu.solve(rhs);
      dx = sol_vec.head(n);
      dy = sol_vec.tail(neq);
      ds = -rp - st.G * dx;
      dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dx, dy, ds, dz;
    if (m == 0) {
      newton(Eigen::VectorXd::Zero(0), dx, dy, ds, dz);
      x += dx;
      y += dy;
      continue;
    }
    const double mu = s.dot(z) / static_cast<double>(m);

    // Predictor.
    newton(s.cwiseProduct(z), dx, dy, ds, dz);
    const double alpha_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff =
        (s + alpha_aff * ds).dot(z + alpha_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector.
    const Eigen::VectorXd rc =
        s.cwiseProduct(z) + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(m, sigma * mu);
    newton(rc, dx, dy, ds, dz);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);
    if (!x.allFinite() || !z.allFinite() || !y.allFinite() || !s.allFinite()) break;
    iterations = it + 1;
  }
  if (best.x.size() > 0) {
    x = best.x;
    y = best.y;
    s = best.s;
    z = best.z;
  }
  return finish(QpStatus::max_iter, iterations);
}

// Minimum uniform slack t >= 0 with G v - t <= h, E v = e. Returns the optimal
// t and the residual of the equality rows at the phase-1 point.
inline std::pair<double, double> phase_one(const QpProblem& p, const SolverTolerances& tol) {
  const Index n = p.size();
  const StackedInequalities st = stack_inequalities(p);
  QpProblem aux = QpProblem::with_size(n + 1);
  aux.q(n) = 1.0;
  aux.lower(n) = 0.0;
  aux.A = Eigen::MatrixXd::Zero(st.G.rows(), n + 1);
  aux.A.leftCols(n) = st.G;
  aux.A.col(n).setConstant(-1.0);
  aux.b = st.h;
  if (p.E.rows() > 0) {
    aux.E = Eigen::MatrixXd::Zero(p.E.rows(), n + 1);
    aux.E.leftCols(n) = p.E;
    aux.e = p.e;
  }
  SolverTolerances aux_tol = tol;
  aux_tol.max_iter = std::max<long>(200, tol.iteration_budget(n));
  const QpSolution r = interior_point(aux, aux_tol, std::nullopt);
  const double eq_res =
      p.E.rows() > 0 ? (p.E * r.v.head(n) - p.e).cwiseAbs().maxCoeff() : 0.0;
  return {r.v(n), eq_res};
}

}  // namespace detail

/// Solves the QP. Invalid input (shape errors, non-symmetric or indefinite Q)
/// throws InputError; everything else is reported through the status field.
/// Largest problem handed to the dense interior-point path when decomposition
/// runs out of iterations.
inline constexpr Index kDenseFallbackLimit = 1500;

inline QpSolution solve(const QpProblem& p, const SolverTolerances& tol = {},
                        const SolveOptions& opts = {}) {
  detail::validate(p, opts.check_convexity);
  if (p.size() == 0) {
    QpSolution empty;
    empty.status = QpStatus::optimal;
    empty.kkt_residual = empty.constraint_violation = 0.0;
    return empty;
  }

  QpSolution sol = opts.allow_decomposition && detail::decomposable(p)
                       ? detail::Decomposition(p, tol).run(opts.start)
                       : detail::interior_point(p, tol, opts.start);

  // Decomposition can crawl when extra directions are nearly dependent; a
  // dense solve is affordable at moderate sizes.
  if (sol.status == QpStatus::max_iter && sol.method == QpMethod::decomposition &&
      p.size() <= kDenseFallbackLimit) {
    QpSolution dense = detail::interior_point(p, tol, std::nullopt);
    if (dense.status == QpStatus::optimal) {
      dense.iterations += sol.iterations;
      sol = std::move(dense);
    }
  }

  if (sol.status == QpStatus::max_iter && sol.method == QpMethod::interior_point) {
    const auto [slack, eq_res] = detail::phase_one(p, tol);
    if (slack > tol.feas_tol || eq_res > tol.feas_tol) {
      sol.status = QpStatus::infeasible;
    } else if (sol.v.allFinite() &&
               (sol.objective < -1e12 || sol.v.cwiseAbs().maxCoeff() > 1e12)) {
      sol.status = QpStatus::unbounded;
    }
  }

  // Never hand back something worse than a feasible starting point.
  if (sol.status != QpStatus::optimal && opts.start && opts.start->size() == p.size() &&
      constraint_violation(p, *opts.start) <= tol.feas_tol &&
      objective_value(p, *opts.start) < sol.objective) {
    sol.v = *opts.start;
    sol.objective = objective_value(p, sol.v);
    sol.constraint_violation = constraint_violation(p, sol.v);
  }
  return sol;
}

}  // namespace fairsvm::qp
