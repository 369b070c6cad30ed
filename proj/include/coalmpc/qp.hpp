#pragma once

#include <optional>
#include <string_view>

#include "coalmpc/numerics.hpp"

namespace coalmpc {

/// min 1/2 x'Hx + f'x  s.t.  Aeq x = beq,  Ain x <= bin.
struct QpProblem {
  Matrix hessian;
  Vector linear;
  Matrix eq_matrix;
  Vector eq_rhs;
  Matrix ineq_matrix;
  Vector ineq_rhs;

  /// Empty constraint blocks with the right column count.
  static QpProblem unconstrained(Matrix h, Vector f);

  Eigen::Index num_variables() const { return hessian.rows(); }
  double objective(const Vector& x) const;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations };

std::string_view to_string(QpStatus status);

struct QpSolution {
  Vector x;
  double objective = 0.0;
  QpStatus status = QpStatus::kInfeasible;
  int iterations = 0;
  /// Multipliers in the Lagrangian 1/2 x'Hx + f'x + l'(Aeq x - beq) + m'(Ain x - bin).
  Vector eq_multipliers;
  Vector ineq_multipliers;
};

struct QpOptions {
  int max_iterations = 2000;
  double feasibility_tolerance = 1e-9;
  /// Relative rank threshold for the equality constraint matrix.
  double rank_tolerance = 1e-10;
  /// Used as the starting point when it is feasible; skips phase one.
  std::optional<Vector> initial_guess;
};

/// Everything in a QP that depends only on H and the constraint matrices,
/// so that problems differing only in f, beq and bin can share it.
/// Rows are [Aeq; Ain] in the caller's order.
class QpFactorization {
 public:
  QpFactorization(const Matrix& hessian, const Matrix& eq_matrix, const Matrix& ineq_matrix);

  Eigen::Index num_variables() const { return hessian_.rows(); }
  Eigen::Index num_eq() const { return num_eq_; }
  Eigen::Index num_ineq() const { return rows_.rows() - num_eq_; }
  bool positive_definite() const { return positive_definite_; }

  const Matrix& hessian() const { return hessian_; }
  const Matrix& rows() const { return rows_; }
  const Matrix& hessian_inverse() const { return hessian_inverse_; }
  /// H^{-1} [Aeq; Ain]'.
  const Matrix& hinv_rows_t() const { return hinv_rows_t_; }
  /// [Aeq; Ain] H^{-1} [Aeq; Ain]'.
  const Matrix& gram() const { return gram_; }
  /// Phase-one rows [Aeq 0; Ain -1; 0 -1] and their Gram matrix.
  const Matrix& phase1_rows() const { return phase1_rows_; }
  const Matrix& phase1_gram() const { return phase1_gram_; }

 private:
  Matrix hessian_;
  Eigen::Index num_eq_ = 0;
  Matrix rows_;
  bool positive_definite_ = false;
  Matrix hessian_inverse_;
  Matrix hinv_rows_t_;
  Matrix gram_;
  Matrix phase1_rows_;
  Matrix phase1_gram_;
};

/// Primal active-set method. Blocking constraints enter by smallest step
/// ratio with ties going to the lowest index; the most negative multiplier
/// leaves, again with ties to the lowest index. Deterministic.
QpSolution solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// Same, reusing a factorization built from the problem's H, Aeq and Ain.
QpSolution solve_qp(const QpProblem& problem, const QpFactorization& factorization,
                    const QpOptions& options = {});

}  // namespace coalmpc
