#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coalmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// LU factorization with partial pivoting.
///
/// Construction throws SingularMatrixError when a pivot falls below
/// `pivot_tolerance * max|A_ij|`.
class LuFactorization {
 public:
  static constexpr double kDefaultPivotTolerance = 1e-12;

  explicit LuFactorization(const Matrix& a,
                           double pivot_tolerance = kDefaultPivotTolerance);

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

  Eigen::Index size() const { return lu_.rows(); }

 private:
  Matrix lu_;
  Eigen::VectorXi perm_;
};

/// Solves A x = b for square A.
Vector solve_linear(const Matrix& a, const Vector& b);
Matrix solve_linear(const Matrix& a, const Matrix& b);

double inf_norm(const Matrix& m);

struct DareOptions {
  int max_iterations = 10000;
  double tolerance = 1e-12;
  /// Newton-Kleinman refinements applied after the fixed-point iteration.
  int refinement_steps = 2;
};

/// Stabilizing solution of the discrete algebraic Riccati equation
///   P = A'PA - A'PB (R + B'PB)^{-1} B'PA + Q
/// by fixed-point iteration on the Riccati map starting from P = Q.
Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r, const DareOptions& options = {});

/// Infinity norm of the Riccati equation residual at P.
double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                        const Matrix& r, const Matrix& p);

/// K = -(R + B'PB)^{-1} B'PA, so that u = K x.
Matrix lqr_gain(const Matrix& a, const Matrix& b, const Matrix& r,
                const Matrix& p);

/// Largest eigenvalue of Acl'P Acl - P + Q + K'RK. A non-positive value
/// certifies x'Px as an upper bound on the infinite-horizon LQ cost of
/// u = K x.
double lyapunov_residual(const Matrix& acl, const Matrix& p, const Matrix& q,
                         const Matrix& r, const Matrix& k);

/// Solves X = A'XA + W by squaring (requires spectral radius of A below 1).
Matrix solve_stein(const Matrix& a, const Matrix& w);

double spectral_radius(const Matrix& a);

Matrix block_diagonal(const std::vector<Matrix>& blocks);

}  // namespace coalmpc
