#pragma once

// Core graph / Laplacian / spectral types, validation and graph Fourier
// transforms. All types are immutable values after construction and all
// operations are pure functions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gtopo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Half-vectorization indexing (strict lower triangle, column-major):
// z = (L_10, L_20, ..., L_{N-1,0}, L_21, ..., L_{N-1,N-2}).
// The same ordering is shared by the solver edge variable and the
// identifiability system.
// ---------------------------------------------------------------------------

inline int vech_size(int n) { return n * (n - 1) / 2; }

// Index of entry (i, j), i > j, in the strict-lower-triangle vectorization.
inline int edge_index(int i, int j, int n) {
  return j * (2 * n - j - 1) / 2 + (i - j - 1);
}

// Inverse of edge_index: returns (i, j) with i > j.
inline std::pair<int, int> edge_nodes(int e, int n) {
  int j = 0;
  while (e >= n - 1 - j) {
    e -= n - 1 - j;
    ++j;
  }
  return {j + 1 + e, j};
}

// Strict lower triangle of a symmetric matrix as a vector.
inline Vector vech_strict(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  Vector z(vech_size(n));
  int e = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) z[e++] = m(i, j);
  return z;
}

// Adjacency from nonnegative edge weights a (vech order): A_ij = a_e.
inline Matrix adjacency_from_weights(const Vector& a, int n) {
  Matrix adj = Matrix::Zero(n, n);
  int e = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      adj(i, j) = a[e];
      adj(j, i) = a[e];
      ++e;
    }
  return adj;
}

// Laplacian from edge weights: L = D - A with D = diag(A 1).
inline Matrix laplacian_from_weights(const Vector& a, int n) {
  Matrix lap = -adjacency_from_weights(a, n);
  for (int i = 0; i < n; ++i) lap(i, i) = -lap.row(i).sum();
  return lap;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

struct Graph {
  Matrix adjacency;

  int n_nodes() const { return static_cast<int>(adjacency.rows()); }

  // Undirected edge count (pairs with weight > tol).
  int n_edges(double tol = 0.0) const {
    int cnt = 0;
    for (int j = 0; j < n_nodes(); ++j)
      for (int i = j + 1; i < n_nodes(); ++i)
        if (adjacency(i, j) > tol) ++cnt;
    return cnt;
  }
};

inline Graph make_graph(Matrix adjacency, double tol = 1e-12) {
  if (adjacency.rows() != adjacency.cols())
    throw std::invalid_argument("graph adjacency must be square");
  const int n = static_cast<int>(adjacency.rows());
  for (int i = 0; i < n; ++i) {
    if (std::abs(adjacency(i, i)) > tol)
      throw std::invalid_argument("graph adjacency must have zero diagonal");
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(adjacency(i, j)))
        throw std::invalid_argument("graph adjacency must be finite");
      if (adjacency(i, j) < -tol)
        throw std::invalid_argument("graph weights must be nonnegative");
      if (std::abs(adjacency(i, j) - adjacency(j, i)) > tol)
        throw std::invalid_argument("graph adjacency must be symmetric");
    }
  }
  // Snap the tolerated noise away so downstream identities hold exactly.
  adjacency = 0.5 * (adjacency + adjacency.transpose()).eval();
  adjacency.diagonal().setZero();
  adjacency = adjacency.cwiseMax(0.0).eval();
  return Graph{std::move(adjacency)};
}

// Connected components via union-find on edges with weight > tol.
inline std::vector<int> connected_components(const Graph& g, double tol = 1e-12) {
  const int n = g.n_nodes();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      if (g.adjacency(i, j) > tol) {
        int a = find(i), b = find(j);
        if (a != b) parent[a] = b;
      }
  std::vector<int> label(n), remap;
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    auto it = std::find(remap.begin(), remap.end(), r);
    if (it == remap.end()) {
      remap.push_back(r);
      label[i] = static_cast<int>(remap.size()) - 1;
    } else {
      label[i] = static_cast<int>(it - remap.begin());
    }
  }
  return label;
}

inline int component_count(const Graph& g, double tol = 1e-12) {
  auto labels = connected_components(g, tol);
  return labels.empty() ? 0 : 1 + *std::max_element(labels.begin(), labels.end());
}

// ---------------------------------------------------------------------------
// Laplacian
// ---------------------------------------------------------------------------

struct LaplacianMatrix {
  Matrix matrix;
  double tolerance = 1e-8;

  int n_nodes() const { return static_cast<int>(matrix.rows()); }
};

struct LaplacianCheck {
  bool ok = false;
  double symmetry_residual = 0.0;
  double row_sum_residual = 0.0;
  double sign_residual = 0.0;   // largest positive off-diagonal
  double psd_residual = 0.0;    // max(0, -lambda_min)
};

inline LaplacianCheck validate_laplacian(const Matrix& m, double tol = 1e-8) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("validate_laplacian: matrix must be square");
  const int n = static_cast<int>(m.rows());
  LaplacianCheck chk;
  chk.symmetry_residual = (m - m.transpose()).cwiseAbs().maxCoeff();
  chk.row_sum_residual = (m * Vector::Ones(n)).cwiseAbs().maxCoeff();
  double sign = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j) sign = std::max(sign, m(i, j));
  chk.sign_residual = std::max(0.0, sign);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  chk.psd_residual = std::max(0.0, -es.eigenvalues().minCoeff());
  chk.ok = chk.symmetry_residual <= tol && chk.row_sum_residual <= tol &&
           chk.sign_residual <= tol && chk.psd_residual <= tol;
  return chk;
}

inline LaplacianMatrix laplacian_from_adjacency(const Graph& g) {
  Matrix lap = -g.adjacency;
  for (int i = 0; i < g.n_nodes(); ++i) lap(i, i) = g.adjacency.row(i).sum();
  return LaplacianMatrix{std::move(lap)};
}

// Adjacency read back from a (possibly noisy) Laplacian: clip the positive
// side of the off-diagonals.
inline Graph adjacency_from_laplacian(const Matrix& lap) {
  const int n = static_cast<int>(lap.rows());
  Matrix adj = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j) adj(i, j) = std::max(0.0, -0.5 * (lap(i, j) + lap(j, i)));
  return Graph{std::move(adj)};
}

// ---------------------------------------------------------------------------
// Spectral decomposition
// ---------------------------------------------------------------------------

struct SpectralDecomposition {
  Matrix eigenvectors;  // columns, orthonormal
  Vector eigenvalues;   // ascending

  int n_nodes() const { return static_cast<int>(eigenvectors.rows()); }
};

// Sign convention: largest-magnitude entry positive (first index on ties).
inline void canonicalize_sign(Eigen::Ref<Matrix> vectors) {
  for (int c = 0; c < vectors.cols(); ++c) {
    int idx = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&idx);
    if (vectors(idx, c) < 0) vectors.col(c) = -vectors.col(c);
  }
}

// Deterministic output: eigenvalues ascending; within numerically equal
// eigenvalues (gap < 1e-10) columns are sign-fixed and ordered
// lexicographically.
inline SpectralDecomposition spectral_decomposition(const LaplacianMatrix& lap) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(lap.matrix);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_decomposition: eigensolver failed (n=" +
                             std::to_string(lap.n_nodes()) + ")");
  Matrix u = es.eigenvectors();
  Vector lam = es.eigenvalues();
  canonicalize_sign(u);
  const int n = static_cast<int>(lam.size());
  auto lex_less = [&](int a, int b) {
    for (int r = 0; r < n; ++r) {
      if (u(r, a) < u(r, b) - 1e-12) return true;
      if (u(r, a) > u(r, b) + 1e-12) return false;
    }
    return false;
  };
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  int start = 0;
  while (start < n) {
    int stop = start + 1;
    while (stop < n && lam[stop] - lam[stop - 1] < 1e-10) ++stop;
    std::sort(order.begin() + start, order.begin() + stop, lex_less);
    start = stop;
  }
  Matrix u_sorted(n, n);
  Vector lam_sorted(n);
  for (int c = 0; c < n; ++c) {
    u_sorted.col(c) = u.col(order[c]);
    lam_sorted[c] = lam[order[c]];
  }
  return SpectralDecomposition{std::move(u_sorted), std::move(lam_sorted)};
}

// ---------------------------------------------------------------------------
// Signals and supports
// ---------------------------------------------------------------------------

struct SignalMatrix {
  Matrix data;  // N x M

  int n_nodes() const { return static_cast<int>(data.rows()); }
  int n_signals() const { return static_cast<int>(data.cols()); }
};

inline SignalMatrix make_signals(Matrix data) {
  if (data.size() == 0) throw std::invalid_argument("signal matrix is empty");
  if (!data.allFinite())
    throw std::invalid_argument("signal matrix must be finite");
  return SignalMatrix{std::move(data)};
}

struct SupportSet {
  std::vector<int> indices;  // sorted, unique

  int bandwidth() const { return static_cast<int>(indices.size()); }
};

inline SupportSet make_support(std::vector<int> indices, int n) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.empty()) throw std::invalid_argument("support must be nonempty");
  if (indices.front() < 0 || indices.back() >= n)
    throw std::invalid_argument("support index out of range");
  return SupportSet{std::move(indices)};
}

// ---------------------------------------------------------------------------
// Graph Fourier transform
// ---------------------------------------------------------------------------

inline void check_orthonormal(const Matrix& u, double tol = 1e-8) {
  if (u.rows() < u.cols())
    throw std::invalid_argument("basis has more columns than rows");
  const double res =
      (u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).norm();
  if (res > tol)
    throw std::invalid_argument("basis is not orthonormal (||U'U - I|| = " +
                                std::to_string(res) + ")");
}

inline Matrix gft(const SignalMatrix& signals, const Matrix& basis) {
  if (basis.rows() != signals.n_nodes())
    throw std::invalid_argument("gft: dimension mismatch");
  check_orthonormal(basis);
  return basis.transpose() * signals.data;
}

inline Matrix igft(const Matrix& coeffs, const Matrix& basis) {
  if (basis.cols() != coeffs.rows())
    throw std::invalid_argument("igft: dimension mismatch");
  check_orthonormal(basis);
  return basis * coeffs;
}

// Band-limiting projector B_K = U Diag(1_K) U^T.
inline Matrix bandlimiting_projector(const Matrix& basis, const SupportSet& support) {
  check_orthonormal(basis);
  const int n = static_cast<int>(basis.rows());
  if (support.indices.back() >= static_cast<int>(basis.cols()))
    throw std::invalid_argument("bandlimiting_projector: support out of range");
  Matrix proj = Matrix::Zero(n, n);
  for (int k : support.indices)
    proj += basis.col(k) * basis.col(k).transpose();
  return proj;
}

}  // namespace gtopo
