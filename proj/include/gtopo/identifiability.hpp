#pragma once

// Constructive identifiability analysis: duplication matrix for the
// zero-row-sum symmetric parameterization, assembly of the linear system
// F [a; lam] = b that a Laplacian with prescribed leading eigenvectors must
// satisfy, and rank-based uniqueness verdicts with the companion sparsity /
// bandwidth bounds.

#include <gtopo/graph_core.hpp>

#include <Eigen/SVD>

#include <stdexcept>
#include <string>

namespace gtopo {

// Hard cap: the systems are built dense and are meant for desk-scale
// diagnostics.
inline constexpr int kIdentifiabilityMaxNodes = 200;

// Duplication matrix M in vec(L) = M * vech(L): places the strict lower
// triangle symmetrically and induces the diagonal as the negated row sum.
inline Matrix duplication_matrix(int n) {
  if (n < 2) throw std::invalid_argument("duplication_matrix: n >= 2");
  if (n > kIdentifiabilityMaxNodes)
    throw std::invalid_argument("duplication_matrix: n capped at " +
                                std::to_string(kIdentifiabilityMaxNodes));
  Matrix m = Matrix::Zero(n * n, vech_size(n));
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      const int e = edge_index(i, j, n);
      m(j * n + i, e) = 1.0;   // L(i, j)
      m(i * n + j, e) = 1.0;   // L(j, i)
      m(i * n + i, e) = -1.0;  // diagonal row-sum terms
      m(j * n + j, e) = -1.0;
    }
  return m;
}

struct IdentifiabilitySystem {
  Matrix f;        // (KN + 1) x (N(N-1)/2 + K - 1)
  Vector b;        // [0_{KN}; p]
  int n_nodes = 0;
  int bandwidth = 0;
  double trace_target = 0.0;

  int rows() const { return static_cast<int>(f.rows()); }
  int cols() const { return static_cast<int>(f.cols()); }
};

// Builds F and b for the leading-K eigenvector matrix u_k (ascending
// eigenvalue order, first column associated with eigenvalue 0) and trace
// target p. The unknown is x = [a; lam_bar] with a >= 0 the edge weights in
// vech order (a = -vech(L)) and lam_bar the K-1 non-kernel eigenvalues.
//
// The trace row is written as 2 * 1' a = p so that the right-hand side
// carries p = tr(L) itself (each edge weight enters the trace twice).
inline IdentifiabilitySystem assemble_system(const Matrix& u_k, double p) {
  const int n = static_cast<int>(u_k.rows());
  const int k = static_cast<int>(u_k.cols());
  if (n < 2 || k < 1 || k > n)
    throw std::invalid_argument("assemble_system: need N >= 2, 1 <= K <= N");
  if (n > kIdentifiabilityMaxNodes)
    throw std::invalid_argument("assemble_system: N capped at " +
                                std::to_string(kIdentifiabilityMaxNodes));
  check_orthonormal(u_k);
  const int ne = vech_size(n);

  IdentifiabilitySystem sys;
  sys.n_nodes = n;
  sys.bandwidth = k;
  sys.trace_target = p;
  sys.f = Matrix::Zero(k * n + 1, ne + k - 1);
  sys.b = Vector::Zero(k * n + 1);
  sys.b[k * n] = p;

  // Eigen-equation block: row (c*N + r) of F x is [L U_K - U_K Lam_K](r, c).
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      const int e = edge_index(i, j, n);
      for (int c = 0; c < k; ++c) {
        const double diff = u_k(i, c) - u_k(j, c);
        sys.f(c * n + i, e) += diff;
        sys.f(c * n + j, e) -= diff;
      }
    }
  // -Q_minus: column c >= 1 subtracts lam_c * u_c.
  for (int c = 1; c < k; ++c)
    for (int r = 0; r < n; ++r) sys.f(c * n + r, ne + c - 1) = -u_k(r, c);
  // Trace row.
  for (int e = 0; e < ne; ++e) sys.f(k * n, e) = 2.0;
  return sys;
}

// Ground-truth unknown vector for a planted (L0, lambda0): x0 = [a0; lam_bar].
inline Vector planted_unknowns(const Matrix& lap, const Vector& eigenvalues, int k) {
  const int n = static_cast<int>(lap.rows());
  Vector x(vech_size(n) + k - 1);
  x.head(vech_size(n)) = -vech_strict(lap);
  for (int c = 1; c < k; ++c) x[vech_size(n) + c - 1] = eigenvalues[c];
  return x;
}

enum class SystemRegime { underdetermined, square, overdetermined };

inline const char* to_string(SystemRegime r) {
  switch (r) {
    case SystemRegime::underdetermined: return "underdetermined";
    case SystemRegime::square: return "square";
    case SystemRegime::overdetermined: return "overdetermined";
  }
  return "?";
}

struct IdentifiabilityVerdict {
  int rank = 0;
  SystemRegime regime = SystemRegime::underdetermined;
  bool singleton = false;
  int rank_lower = 0;       // K - 1
  int rank_upper = 0;       // regime-dependent
  int sparsity_bound = 0;   // K(N-2) + 2c, ordered adjacency entries
  bool bandwidth_bound_ok = true;  // K >= 2s/N, when the graph is known
  bool bandwidth_checked = false;
};

inline int sparsity_bound(int n, int k, int components) {
  if (k < 1 || components < 1 || components > n)
    throw std::invalid_argument("sparsity_bound: need K >= 1, 1 <= c <= N");
  return k * (n - 2) + 2 * components;
}

// K >= 2s/N with s = K - c + ||A||_0 / 2 (||A||_0 counts ordered entries).
inline bool bandwidth_bound_ok(int n, int k, int components, int adjacency_l0) {
  return static_cast<long long>(k) * n >=
         2LL * k - 2LL * components + adjacency_l0;
}

// The regime boundary K = N/2 - 2/(N-1) compared in exact integer
// arithmetic: 2K(N-1) vs N(N-1) - 4.
inline SystemRegime regime_for(int n, int k) {
  const long long lhs = 2LL * k * (n - 1);
  const long long rhs = static_cast<long long>(n) * (n - 1) - 4;
  if (lhs < rhs) return SystemRegime::underdetermined;
  if (lhs == rhs) return SystemRegime::square;
  return SystemRegime::overdetermined;
}

inline IdentifiabilityVerdict rank_analysis(const IdentifiabilitySystem& sys,
                                            double svd_tol = 1e-10,
                                            int components = 1,
                                            int adjacency_l0 = -1) {
  const int n = sys.n_nodes;
  const int k = sys.bandwidth;
  Eigen::JacobiSVD<Matrix> svd(sys.f);
  const Vector& sv = svd.singularValues();
  const double cut = sv.size() ? svd_tol * sv[0] * std::max(sys.rows(), sys.cols())
                               : 0.0;
  IdentifiabilityVerdict v;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++v.rank;
  v.regime = regime_for(n, k);
  v.rank_lower = k - 1;
  v.rank_upper = v.regime == SystemRegime::overdetermined ? sys.cols() : sys.rows();
  v.singleton =
      (v.regime == SystemRegime::square && v.rank == sys.rows()) ||
      (v.regime == SystemRegime::overdetermined && v.rank == sys.cols());
  v.sparsity_bound = sparsity_bound(n, k, components);
  if (adjacency_l0 >= 0) {
    v.bandwidth_bound_ok = bandwidth_bound_ok(n, k, components, adjacency_l0);
    v.bandwidth_checked = true;
  }
  return v;
}

}  // namespace gtopo
