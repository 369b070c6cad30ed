#include <doctest.h>

#include <random>

#include "coalmpc/qp.hpp"
#include "oracles.hpp"

using namespace coalmpc;

namespace {

QpProblem random_qp(std::mt19937& rng, int n, int m) {
  std::normal_distribution<double> nd;
  Matrix l(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) l(i, j) = nd(rng);
  QpProblem p = QpProblem::unconstrained(l * l.transpose() + 0.5 * Matrix::Identity(n, n),
                                         Vector::NullaryExpr(n, [&] { return 3.0 * nd(rng); }));
  p.ineq_matrix = Matrix::NullaryExpr(m, n, [&] { return nd(rng); });
  // Contains the origin, so always feasible.
  p.ineq_rhs = Vector::NullaryExpr(m, [&] { return std::abs(nd(rng)) + 0.1; });
  return p;
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("unconstrained minimum solves the normal equations") {
  Matrix h(2, 2);
  h << 2, 0, 0, 4;
  const QpSolution s = solve_qp(QpProblem::unconstrained(h, Vector::Constant(2, -4)));
  CHECK(s.status == QpStatus::kOptimal);
  CHECK(s.x(0) == doctest::Approx(2.0));
  CHECK(s.x(1) == doctest::Approx(1.0));
}

TEST_CASE("matches exhaustive active-set enumeration") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    const int m = trial % 7;
    const QpProblem p = random_qp(rng, n, m);
    const auto ref = oracle::brute_force_qp(p.hessian, p.linear, p.ineq_matrix, p.ineq_rhs);
    REQUIRE(ref);
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    CHECK(std::abs(s.objective - ref->objective) <= 1e-6);
    CHECK((s.x - ref->x).cwiseAbs().maxCoeff() <= 1e-5);
    if (m > 0) CHECK((p.ineq_matrix * s.x - p.ineq_rhs).maxCoeff() <= 1e-9);
  }
}

TEST_CASE("prefactored and plain solves agree") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const QpProblem p = random_qp(rng, 4, 6);
    const QpFactorization f(p.hessian, Matrix(0, 4), p.ineq_matrix);
    const QpSolution a = solve_qp(p);
    const QpSolution b = solve_qp(p, f);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("infeasible start is repaired by phase one") {
  Matrix h = Matrix::Identity(2, 2);
  QpProblem p = QpProblem::unconstrained(h, Vector::Zero(2));
  p.ineq_matrix = -Matrix::Identity(2, 2);  // x >= 1
  p.ineq_rhs = -Vector::Ones(2);
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::kOptimal);
  CHECK(s.x(0) == doctest::Approx(1.0));
  CHECK(s.ineq_multipliers.minCoeff() >= 0.0);
}

TEST_CASE("equality constraints with redundant rows") {
  QpProblem p = QpProblem::unconstrained(Matrix::Identity(3, 3), Vector::Zero(3));
  p.eq_matrix = Matrix(2, 3);
  p.eq_matrix << 1, 1, 1, 2, 2, 2;
  p.eq_rhs = Vector(2);
  p.eq_rhs << 3, 6;
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::kOptimal);
  CHECK((s.x - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("inconsistent equalities are infeasible") {
  QpProblem p = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(2));
  p.eq_matrix = Matrix(2, 2);
  p.eq_matrix << 1, 0, 1, 0;
  p.eq_rhs = Vector(2);
  p.eq_rhs << 0, 1;
  CHECK(solve_qp(p).status == QpStatus::kInfeasible);
}

TEST_CASE("empty inequality box is infeasible") {
  QpProblem p = QpProblem::unconstrained(Matrix::Identity(1, 1), Vector::Zero(1));
  p.ineq_matrix = Matrix(2, 1);
  p.ineq_matrix << 1, -1;  // x <= -1 and x >= 1
  p.ineq_rhs = Vector::Constant(2, -1.0);
  CHECK(solve_qp(p).status == QpStatus::kInfeasible);
}

TEST_CASE("dimension mismatch is rejected") {
  QpProblem p = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(3));
  CHECK_THROWS_AS(solve_qp(p), DimensionError);
}

}
