// Independent reference implementations used only by the tests. None of them
// shares code with the library.
#pragma once

#include <Eigen/Dense>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Strictly convex QP with inequalities only, solved by trying every active
// set and keeping the KKT point.
struct BruteForceQp {
  Vector x;
  double objective = 0;
};

inline std::optional<BruteForceQp> brute_force_qp(const Matrix& h, const Vector& f,
                                                  const Matrix& a, const Vector& b) {
  const int n = static_cast<int>(h.rows());
  const int m = static_cast<int>(a.rows());
  std::optional<BruteForceQp> best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int w = static_cast<int>(act.size());
    if (w > n) continue;
    Matrix kkt = Matrix::Zero(n + w, n + w);
    Vector rhs(n + w);
    kkt.topLeftCorner(n, n) = h;
    rhs.head(n) = -f;
    for (int j = 0; j < w; ++j) {
      kkt.block(n + j, 0, 1, n) = a.row(act[j]);
      kkt.block(0, n + j, n, 1) = a.row(act[j]).transpose();
      rhs(n + j) = b(act[j]);
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (lu.rank() < n + w) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);
    if (m > 0 && (a * x - b).maxCoeff() > 1e-9) continue;
    if (w > 0 && sol.tail(w).minCoeff() < -1e-9) continue;
    const double obj = 0.5 * x.dot(h * x) + f.dot(x);
    if (!best || obj < best->objective) best = BruteForceQp{x, obj};
  }
  return best;
}

// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
};

// Chain graph components, each sorted, ordered by smallest member.
inline std::vector<std::vector<int>> chain_components(int agents, unsigned long long mask) {
  UnionFind uf(agents);
  for (int l = 0; l + 1 < agents; ++l)
    if (mask & (1ull << l)) uf.unite(l, l + 1);
  std::vector<std::vector<int>> out;
  std::vector<int> slot(agents, -1);
  for (int i = 0; i < agents; ++i) {
    const int r = uf.find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;
}

// Structure-preserving doubling for P = A'PA - A'PB(R + B'PB)^{-1}B'PA + Q.
inline Matrix dare_doubling(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                            int max_iterations = 200) {
  const auto n = a.rows();
  Matrix ak = a;
  Matrix gk = b * r.inverse() * b.transpose();
  Matrix hk = q;
  const Matrix id = Matrix::Identity(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix w = (id + gk * hk).inverse();
    const Matrix a_next = ak * w * ak;
    const Matrix g_next = gk + ak * w * gk * ak.transpose();
    const Matrix h_next = hk + ak.transpose() * hk * w * ak;
    const double change = (h_next - hk).cwiseAbs().maxCoeff();
    ak = a_next;
    gk = 0.5 * (g_next + g_next.transpose());
    hk = 0.5 * (h_next + h_next.transpose());
    if (change <= 1e-13 * (1.0 + hk.cwiseAbs().maxCoeff())) break;
  }
  return hk;
}

// Integrator-delay canal stepped from flow histories rather than matrices.
// Flows are relative to the settled regime; offtake changes likewise.
class DelayCanal {
 public:
  DelayCanal(std::vector<double> areas, std::vector<int> delays, double sample_time)
      : areas_(std::move(areas)), delays_(std::move(delays)), tc_(sample_time),
        levels_(areas_.size(), 0.0) {
    for (int d : delays_) history_.emplace_back(d, 0.0);  // q(k-1), ..., q(k-d)
  }

  const std::vector<double>& levels() const { return levels_; }
  double gate_flow(int i) const { return history_[i].front(); }

  void step(const std::vector<double>& dq, const std::vector<double>& offtakes) {
    const std::size_t n = areas_.size();
    std::vector<double> now(n);
    for (std::size_t i = 0; i < n; ++i) now[i] = history_[i].front() + dq[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double arriving = history_[i].back();
      const double leaving = i + 1 < n ? now[i + 1] : 0.0;
      levels_[i] += tc_ / areas_[i] * (arriving - leaving - offtakes[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      history_[i].insert(history_[i].begin(), now[i]);
      history_[i].pop_back();
    }
  }

  // [q(k-1), ..., q(k-d), e] per reach.
  Vector stacked() const {
    std::vector<double> v;
    for (std::size_t i = 0; i < areas_.size(); ++i) {
      v.insert(v.end(), history_[i].begin(), history_[i].end());
      v.push_back(levels_[i]);
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

 private:
  std::vector<double> areas_;
  std::vector<int> delays_;
  double tc_;
  std::vector<double> levels_;
  std::vector<std::vector<double>> history_;
};

}  // namespace oracle
