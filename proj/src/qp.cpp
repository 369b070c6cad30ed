#include "coalmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace coalmpc {

QpProblem QpProblem::unconstrained(Matrix h, Vector f) {
  const auto n = h.rows();
  QpProblem p;
  p.hessian = std::move(h);
  p.linear = std::move(f);
  p.eq_matrix = Matrix(0, n);
  p.eq_rhs = Vector(0);
  p.ineq_matrix = Matrix(0, n);
  p.ineq_rhs = Vector(0);
  return p;
}

double QpProblem::objective(const Vector& x) const {
  return 0.5 * x.dot(hessian * x) + linear.dot(x);
}

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

namespace {

Matrix rows_or_empty(const Matrix& m, Eigen::Index n) {
  return m.rows() == 0 ? Matrix(0, n) : m;
}

}  // namespace

QpFactorization::QpFactorization(const Matrix& hessian, const Matrix& eq_matrix,
                                 const Matrix& ineq_matrix)
    : hessian_(hessian), num_eq_(eq_matrix.rows()) {
  const auto n = hessian.rows();
  if (hessian.cols() != n || (eq_matrix.rows() > 0 && eq_matrix.cols() != n) ||
      (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n)) {
    throw DimensionError("QP factorization data has inconsistent dimensions");
  }
  const auto n_in = ineq_matrix.rows();
  rows_.resize(num_eq_ + n_in, n);
  if (num_eq_ > 0) rows_.topRows(num_eq_) = eq_matrix;
  if (n_in > 0) rows_.bottomRows(n_in) = ineq_matrix;

  Eigen::LLT<Matrix> llt(hessian);
  if (n > 0 && llt.info() == Eigen::Success) {
    const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
    if (diag.minCoeff() > 1e-7 * diag.maxCoeff()) {
      positive_definite_ = true;
      hessian_inverse_ = llt.solve(Matrix::Identity(n, n));
      hessian_inverse_ = 0.5 * (hessian_inverse_ + hessian_inverse_.transpose()).eval();
      hinv_rows_t_ = hessian_inverse_ * rows_.transpose();
      gram_ = rows_ * hinv_rows_t_;
    }
  }

  phase1_rows_ = Matrix::Zero(rows_.rows() + 1, n + 1);
  phase1_rows_.topLeftCorner(rows_.rows(), n) = rows_;
  phase1_rows_.block(num_eq_, n, n_in, 1).setConstant(-1.0);
  phase1_rows_(rows_.rows(), n) = -1.0;
  phase1_gram_ = phase1_rows_ * phase1_rows_.transpose();
}

namespace {

// Equality-constrained step for a working set of row indices:
//   min 1/2 p'Hp + g'p  s.t.  rows(W) p = 0.
// With H positive definite this goes through the Schur complement
// gathered from a precomputed Gram matrix; otherwise through the full KKT
// system.
class KktSolver {
 public:
  // H^{-1} = scale * (hinv ? *hinv : I); H^{-1} rows' = scale * (hinv_rows_t ? *hinv_rows_t : rows').
  KktSolver(const Matrix& h, const Matrix& rows, bool pd, const Matrix* hinv,
            const Matrix* hinv_rows_t, const Matrix* gram, double scale)
      : h_(h), rows_(rows), pd_(pd), hinv_(hinv), hinv_rows_t_(hinv_rows_t), gram_(gram),
        scale_(scale) {}

  // Returns the size of the unprojected Newton step, against which the
  // cancellation error in p is measured.
  double solve(const std::vector<int>& w, const Vector& g, Vector& p, Vector& lambda) const {
    const auto n = h_.rows();
    const auto nw = static_cast<Eigen::Index>(w.size());
    if (pd_) {
      const Vector hg = scale_ * (hinv_ ? Vector(*hinv_ * g) : g);
      const double newton = n > 0 ? hg.cwiseAbs().maxCoeff() : 0.0;
      p = -hg;
      lambda.resize(nw);
      if (nw == 0) return newton;
      Matrix schur(nw, nw);
      Vector rhs(nw);
      for (Eigen::Index a = 0; a < nw; ++a) {
        for (Eigen::Index b = 0; b < nw; ++b) schur(a, b) = scale_ * (*gram_)(w[a], w[b]);
        rhs(a) = -rows_.row(w[a]).dot(hg);
      }
      lambda = LuFactorization(schur).solve(rhs);
      for (Eigen::Index a = 0; a < nw; ++a) {
        if (hinv_rows_t_) {
          p -= lambda(a) * scale_ * hinv_rows_t_->col(w[a]);
        } else {
          p -= lambda(a) * scale_ * rows_.row(w[a]).transpose();
        }
      }
      // A nonsingular working set of n rows admits only the zero step.
      if (nw >= n) p.setZero();
      return newton;
    }
    Matrix kkt = Matrix::Zero(n + nw, n + nw);
    kkt.topLeftCorner(n, n) = h_;
    for (Eigen::Index a = 0; a < nw; ++a) {
      kkt.block(n + a, 0, 1, n) = rows_.row(w[a]);
      kkt.block(0, n + a, n, 1) = rows_.row(w[a]).transpose();
    }
    Vector rhs = Vector::Zero(n + nw);
    rhs.head(n) = -g;
    const Vector sol = LuFactorization(kkt).solve(rhs);
    p = sol.head(n);
    lambda = sol.tail(nw);
    return 0.0;
  }

 private:
  const Matrix& h_;
  const Matrix& rows_;
  bool pd_;
  const Matrix* hinv_;
  const Matrix* hinv_rows_t_;
  const Matrix* gram_;
  double scale_;
};

// Primal active set from a feasible x. Rows [0, first_ineq) are equalities,
// of which `eq_rows` are kept; the remaining rows are inequalities with
// right-hand side `bin`.
QpSolution active_set(const Matrix& h, const Vector& f, const Matrix& rows,
                      Eigen::Index first_ineq, const std::vector<int>& eq_rows, const Vector& bin,
                      const KktSolver& kkt, Vector x, const QpOptions& options) {
  const auto n = h.rows();
  const auto n_in = rows.rows() - first_ineq;
  const auto n_eq = static_cast<Eigen::Index>(eq_rows.size());

  std::vector<int> working;  // inequality indices, in order of entry
  std::vector<char> in_working(static_cast<std::size_t>(n_in), 0);
  std::vector<char> skip(static_cast<std::size_t>(n_in), 0);

  QpSolution sol;
  sol.status = QpStatus::kMaxIterations;
  Vector p, lambda;
  std::vector<int> w;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    sol.iterations = iter + 1;
    w = eq_rows;
    for (int i : working) w.push_back(static_cast<int>(first_ineq) + i);
    const Vector g = h * x + f;
    double newton = 0;
    try {
      newton = kkt.solve(w, g, p, lambda);
    } catch (const SingularMatrixError&) {
      // Last entry is numerically dependent on the rest of the working set.
      if (working.empty()) throw;
      in_working[static_cast<std::size_t>(working.back())] = 0;
      skip[static_cast<std::size_t>(working.back())] = 1;
      working.pop_back();
      continue;
    }

    const double xscale = 1.0 + (n > 0 ? x.cwiseAbs().maxCoeff() : 0.0);
    const double p_tol = std::max(1e-11 * xscale, 1e-13 * newton);
    if (n == 0 || p.cwiseAbs().maxCoeff() <= p_tol) {
      const double gscale = 1.0 + (n > 0 ? g.cwiseAbs().maxCoeff() : 0.0);
      int leave = -1;
      double most_negative = -1e-10 * gscale;
      for (std::size_t i = 0; i < working.size(); ++i) {
        const double mu = lambda(n_eq + static_cast<Eigen::Index>(i));
        if (mu < most_negative ||
            (leave >= 0 && mu == most_negative && working[i] < working[leave])) {
          most_negative = mu;
          leave = static_cast<int>(i);
        }
      }
      if (leave < 0) {
        sol.status = QpStatus::kOptimal;
        break;
      }
      in_working[static_cast<std::size_t>(working[leave])] = 0;
      working.erase(working.begin() + leave);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    const double p_norm = p.norm();
    if (n_in > 0) {
      const auto ain = rows.bottomRows(n_in);
      const Vector ap = ain * p;
      const Vector slack = bin - ain * x;
      for (Eigen::Index i = 0; i < n_in; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (in_working[si] || skip[si]) continue;
        const double row_norm = std::max(ain.row(i).norm(), 1e-300);
        if (ap(i) <= 1e-11 * row_norm * p_norm) continue;
        const double ratio = std::max(0.0, slack(i) / ap(i));
        if (ratio < alpha) {
          alpha = ratio;
          blocking = static_cast<int>(i);
        }
      }
    }
    x += alpha * p;
    if (alpha > 0) std::fill(skip.begin(), skip.end(), 0);
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = 1;
    }
  }

  sol.x = x;
  sol.objective = 0.5 * x.dot(h * x) + f.dot(x);
  sol.eq_multipliers = Vector::Zero(n_eq);
  sol.ineq_multipliers = Vector::Zero(n_in);
  if (lambda.size() == n_eq + static_cast<Eigen::Index>(working.size())) {
    sol.eq_multipliers = lambda.head(n_eq);
    for (std::size_t i = 0; i < working.size(); ++i) {
      sol.ineq_multipliers(working[i]) = lambda(n_eq + static_cast<Eigen::Index>(i));
    }
  }
  return sol;
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options) {
  const auto n = problem.num_variables();
  const Matrix aeq = rows_or_empty(problem.eq_matrix, n);
  const Matrix ain = rows_or_empty(problem.ineq_matrix, n);
  if (problem.hessian.cols() != n || aeq.cols() != n || ain.cols() != n) {
    throw DimensionError("QP data has inconsistent dimensions");
  }
  return solve_qp(problem, QpFactorization(problem.hessian, aeq, ain), options);
}

QpSolution solve_qp(const QpProblem& problem, const QpFactorization& fact,
                    const QpOptions& options) {
  const auto n = problem.num_variables();
  const Matrix& rows = fact.rows();
  const auto n_eq_all = fact.num_eq();
  const auto m = fact.num_ineq();
  if (problem.hessian.cols() != n || problem.linear.size() != n || fact.num_variables() != n ||
      problem.eq_rhs.size() != n_eq_all || problem.ineq_rhs.size() != m) {
    throw DimensionError("QP data has inconsistent dimensions");
  }
  const Vector& beq_all = problem.eq_rhs;
  const Vector& bin = problem.ineq_rhs;

  QpSolution infeasible;
  infeasible.status = QpStatus::kInfeasible;
  infeasible.x = Vector::Zero(n);
  infeasible.eq_multipliers = Vector::Zero(n_eq_all);
  infeasible.ineq_multipliers = Vector::Zero(m);

  // Equality rows: drop redundant ones, reject inconsistent systems.
  std::vector<int> kept;
  Vector x0 = Vector::Zero(n);
  if (n_eq_all > 0) {
    const Matrix aeq = rows.topRows(n_eq_all);
    Eigen::ColPivHouseholderQR<Matrix> qr(aeq.transpose());
    qr.setThreshold(options.rank_tolerance);
    const auto rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = 0; i < rank; ++i) kept.push_back(perm(i));
    std::sort(kept.begin(), kept.end());
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(aeq);
    cod.setThreshold(options.rank_tolerance);
    x0 = cod.solve(beq_all);
    const double resid = (aeq * x0 - beq_all).cwiseAbs().maxCoeff();
    const double scale = 1.0 + beq_all.cwiseAbs().maxCoeff();
    if (!(resid <= 1e-8 * scale)) return infeasible;
  }

  auto max_violation = [&](const Vector& x) {
    return m == 0 ? 0.0 : (rows.bottomRows(m) * x - bin).maxCoeff();
  };
  auto feasible = [&](const Vector& x) {
    if (x.size() != n) return false;
    if (n_eq_all > 0 &&
        (rows.topRows(n_eq_all) * x - beq_all).cwiseAbs().maxCoeff() >
            options.feasibility_tolerance * (1.0 + beq_all.cwiseAbs().maxCoeff())) {
      return false;
    }
    return max_violation(x) <= options.feasibility_tolerance;
  };

  Vector start;
  if (options.initial_guess && feasible(*options.initial_guess)) {
    start = *options.initial_guess;
  } else if (feasible(x0)) {
    start = x0;
  } else {
    // Phase one: minimize the largest violation t over (x, t), with a small
    // proximal term keeping the subproblem strictly convex.
    bool found = false;
    const Matrix& rows1 = fact.phase1_rows();
    Vector bin1 = Vector::Zero(m + 1);
    bin1.head(m) = bin;
    for (double eps : {1e-6, 1e-10}) {
      const Matrix h1 = eps * Matrix::Identity(n + 1, n + 1);
      Vector f1 = Vector::Zero(n + 1);
      f1.head(n) = -eps * x0;
      f1(n) = 1.0;
      Vector guess(n + 1);
      guess.head(n) = x0;
      guess(n) = std::max(0.0, max_violation(x0));
      const KktSolver kkt1(h1, rows1, true, nullptr, nullptr, &fact.phase1_gram(), 1.0 / eps);
      const QpSolution s1 = active_set(h1, f1, rows1, n_eq_all, kept, bin1, kkt1, guess, options);
      if (s1.status != QpStatus::kInfeasible && feasible(s1.x.head(n))) {
        start = s1.x.head(n);
        found = true;
        break;
      }
    }
    if (!found) return infeasible;
  }

  const KktSolver kkt(fact.hessian(), rows, fact.positive_definite(),
                      fact.positive_definite() ? &fact.hessian_inverse() : nullptr,
                      fact.positive_definite() ? &fact.hinv_rows_t() : nullptr,
                      fact.positive_definite() ? &fact.gram() : nullptr, 1.0);
  QpSolution sol =
      active_set(fact.hessian(), problem.linear, rows, n_eq_all, kept, bin, kkt, start, options);
  // Report equality multipliers against the caller's rows.
  Vector eqm = Vector::Zero(n_eq_all);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    eqm(kept[i]) = sol.eq_multipliers(static_cast<Eigen::Index>(i));
  }
  sol.eq_multipliers = eqm;
  return sol;
}

}  // namespace coalmpc
