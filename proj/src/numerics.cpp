#include "coalmpc/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace coalmpc {

LuFactorization::LuFactorization(const Matrix& a, double pivot_tolerance)
    : lu_(a), perm_(a.rows()) {
  if (a.rows() != a.cols()) {
    throw DimensionError("LU factorization requires a square matrix");
  }
  const Eigen::Index n = a.rows();
  const double scale = n > 0 ? a.cwiseAbs().maxCoeff() : 0.0;
  const double threshold = pivot_tolerance * scale;
  for (Eigen::Index i = 0; i < n; ++i) perm_(i) = static_cast<int>(i);

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    double best = std::abs(lu_(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (!(best > threshold) || scale == 0.0) {
      throw SingularMatrixError("singular matrix: pivot " + std::to_string(best) +
                                " at column " + std::to_string(k));
    }
    if (pivot != k) {
      lu_.row(k).swap(lu_.row(pivot));
      std::swap(perm_(k), perm_(pivot));
    }
    const double inv = 1.0 / lu_(k, k);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double factor = lu_(i, k) * inv;
      lu_(i, k) = factor;
      if (factor != 0.0) {
        lu_.row(i).tail(n - k - 1) -= factor * lu_.row(k).tail(n - k - 1);
      }
    }
  }
}

Matrix LuFactorization::solve(const Matrix& b) const {
  const Eigen::Index n = lu_.rows();
  if (b.rows() != n) throw DimensionError("right-hand side has wrong row count");
  Matrix x(n, b.cols());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = b.row(perm_(i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) x.row(i) -= lu_(i, j) * x.row(j);
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = i + 1; j < n; ++j) x.row(i) -= lu_(i, j) * x.row(j);
    x.row(i) /= lu_(i, i);
  }
  return x;
}

Vector LuFactorization::solve(const Vector& b) const {
  return solve(Matrix(b)).col(0);
}

Vector solve_linear(const Matrix& a, const Vector& b) {
  return LuFactorization(a).solve(b);
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  return LuFactorization(a).solve(b);
}

double inf_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

namespace {

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_riccati_dims(const Matrix& a, const Matrix& b, const Matrix& q,
                        const Matrix& r) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw DimensionError("Riccati data has inconsistent dimensions");
  }
}

// One application of the Riccati map.
Matrix riccati_map(const Matrix& a, const Matrix& b, const Matrix& q,
                   const Matrix& r, const Matrix& p) {
  const Matrix pa = p * a;
  const Matrix bt_pa = b.transpose() * pa;
  const Matrix gram = r + b.transpose() * p * b;
  const Matrix correction = bt_pa.transpose() * solve_linear(gram, bt_pa);
  return symmetrized(a.transpose() * pa - correction + q);
}

}  // namespace

Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r, const DareOptions& options) {
  check_riccati_dims(a, b, q, r);
  Matrix p = symmetrized(q);
  bool converged = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    Matrix next = riccati_map(a, b, q, r, p);
    const double step = (next - p).cwiseAbs().maxCoeff();
    const double scale = 1.0 + p.cwiseAbs().maxCoeff();
    p = std::move(next);
    if (!std::isfinite(step)) break;
    if (step <= options.tolerance * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError(
        "Riccati iteration did not converge; (A, B) may not be stabilizable");
  }
  // The fixed point is only accurate to the stopping tolerance divided by
  // the closed-loop contraction rate; polish with Newton-Kleinman steps,
  // each an exact Lyapunov solve for the current gain.
  for (int it = 0; it < options.refinement_steps; ++it) {
    const Matrix k = lqr_gain(a, b, r, p);
    const Matrix acl = a + b * k;
    if (spectral_radius(acl) >= 1.0) break;
    p = symmetrized(solve_stein(acl, q + k.transpose() * r * k));
  }
  return p;
}

double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                        const Matrix& r, const Matrix& p) {
  check_riccati_dims(a, b, q, r);
  return inf_norm(riccati_map(a, b, q, r, p) - p);
}

Matrix lqr_gain(const Matrix& a, const Matrix& b, const Matrix& r,
                const Matrix& p) {
  if (b.cols() == 0) return Matrix::Zero(0, a.cols());
  const Matrix gram = r + b.transpose() * p * b;
  return -solve_linear(gram, Matrix(b.transpose() * p * a));
}

double lyapunov_residual(const Matrix& acl, const Matrix& p, const Matrix& q,
                         const Matrix& r, const Matrix& k) {
  const auto n = acl.rows();
  if (acl.cols() != n || p.rows() != n || p.cols() != n || q.rows() != n ||
      k.cols() != n || r.rows() != k.rows() || r.cols() != k.rows()) {
    throw DimensionError("Lyapunov certificate data has inconsistent dimensions");
  }
  if (n == 0) return 0.0;
  const Matrix m =
      symmetrized(acl.transpose() * p * acl - p + q + k.transpose() * r * k);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

Matrix solve_stein(const Matrix& a, const Matrix& w) {
  Matrix x = w;
  Matrix ak = a;
  for (int it = 0; it < 64; ++it) {
    const Matrix increment = ak.transpose() * x * ak;
    x += increment;
    const double inc = increment.cwiseAbs().maxCoeff();
    if (!std::isfinite(inc)) break;
    if (inc <= 1e-17 * (1.0 + x.cwiseAbs().maxCoeff())) return x;
    ak = ak * ak;
  }
  throw ConvergenceError("Stein equation did not converge; matrix not Schur stable");
}

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(a, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& blk : blocks) {
    rows += blk.rows();
    cols += blk.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& blk : blocks) {
    out.block(r, c, blk.rows(), blk.cols()) = blk;
    r += blk.rows();
    c += blk.cols();
  }
  return out;
}

}  // namespace coalmpc
