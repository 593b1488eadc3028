#pragma once

// Alternating minimization for the joint sparsifying-transform / block-sparse
// coefficient problem: min ||U'Y - S||_F^2 over orthonormal U with first
// column 1/sqrt(N)*1 and S with at most K nonzero rows. Both half-steps are
// solved in closed form. Also hosts the discrete-alphabet derotation.

#include <gtopo/graph_core.hpp>
#include <gtopo/rng.hpp>

#include <Eigen/SVD>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace gtopo {

enum class TransformInit { householder_identity, random_orthonormal };

struct TransformLearnConfig {
  int bandwidth = 1;  // K
  int max_iterations = 500;
  double rel_tol = 1e-6;           // on objective change
  TransformInit init = TransformInit::householder_identity;
  std::uint64_t init_seed = 0;     // random_orthonormal only
  double rank_tol_factor = 1e-12;  // SVD rank cut
};

struct TransformEstimate {
  Matrix u_hat;                        // N x N, first column 1/sqrt(N)*1
  Matrix s_hat;                        // N x M, at most K nonzero rows
  SupportSet support;                  // selected rows
  std::vector<double> objective_trace; // ||U'Y - S||_F^2 per half-step
  int iterations = 0;
  bool converged = false;

  double objective() const {
    return objective_trace.empty() ? 0.0 : objective_trace.back();
  }
};

// Orthonormal frame whose first column is 1/sqrt(N)*1, by the Householder
// reflection mapping e1 onto it. Deterministic; used as the default
// initializer and as the completion for degenerate U-steps.
inline Matrix householder_basis(int n) {
  const double b = 1.0 / std::sqrt(static_cast<double>(n));
  Vector v = Vector::Constant(n, b);
  Vector w = -v;
  w[0] += 1.0;  // w = e1 - v
  Matrix h = Matrix::Identity(n, n) - (2.0 / w.squaredNorm()) * (w * w.transpose());
  h.col(0) = Vector::Constant(n, b);  // exact first column
  return h;
}

// Random feasible frame: first column exactly 1/sqrt(N)*1, remaining columns
// an orthonormal completion of a seeded Gaussian matrix.
inline Matrix random_feasible_basis(int n, std::uint64_t seed) {
  Rng rng(seed);
  const double b = 1.0 / std::sqrt(static_cast<double>(n));
  Matrix a(n, n);
  a.col(0) = Vector::Constant(n, b);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = rng.normal01();
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  if (q(0, 0) * b < 0) q.col(0) = -q.col(0);  // align, then pin exactly
  q.col(0) = Vector::Constant(n, b);
  return q;
}

// ---------------------------------------------------------------------------
// S-step: best K-row-sparse approximation (keep the K largest-norm rows,
// lowest row index wins ties).
// ---------------------------------------------------------------------------

inline std::pair<Matrix, SupportSet> block_sparse_projection(const Matrix& coeffs,
                                                             int bandwidth) {
  const int n = static_cast<int>(coeffs.rows());
  if (bandwidth < 1 || bandwidth > n)
    throw std::invalid_argument("block_sparse_projection: need 1 <= K <= N");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vector norms(n);
  for (int i = 0; i < n; ++i) norms[i] = coeffs.row(i).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return norms[a] > norms[b]; });
  std::vector<int> keep(order.begin(), order.begin() + bandwidth);
  auto support = make_support(keep, n);
  Matrix s = Matrix::Zero(n, coeffs.cols());
  for (int i : support.indices) s.row(i) = coeffs.row(i);
  return {std::move(s), std::move(support)};
}

// ---------------------------------------------------------------------------
// U-step: closed-form maximizer of tr(U' Y S') over feasible U.
//
// With Ybar = Y S', Z = Ybar without its first column, Zp = (I - 11'/N) Z and
// thin SVD Zp = X Sigma V', the optimum is U = [b*1, Xm V'] where Xm stacks
// the rank-r left factor with an orthonormal completion lying in the
// nullspace of [1'; Xr'].
// ---------------------------------------------------------------------------

inline Matrix u_step(const SignalMatrix& signals, const Matrix& s,
                     double rank_tol_factor = 1e-12) {
  const int n = signals.n_nodes();
  if (s.rows() != n || s.cols() != signals.data.cols())
    throw std::invalid_argument("u_step: dimension mismatch");
  const double b = 1.0 / std::sqrt(static_cast<double>(n));

  Matrix ybar = signals.data * s.transpose();  // N x N
  Matrix z = ybar.rightCols(n - 1);            // drop first column
  Matrix zp = z;                               // P z, P = I - 11'/N
  zp.rowwise() -= z.colwise().mean();

  Eigen::JacobiSVD<Matrix> svd(zp, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cut =
      sv.size() ? rank_tol_factor * sv[0] * std::max(n, static_cast<int>(s.cols()))
                : 0.0;
  int rank = 0;
  while (rank < sv.size() && sv[rank] > cut) ++rank;

  if (rank == 0) return householder_basis(n);  // any feasible U is optimal

  Matrix xm(n, n - 1);
  xm.leftCols(rank) = svd.matrixU().leftCols(rank);
  if (rank < n - 1) {
    // Orthonormal completion in the nullspace of B = [1'; Xr'].
    Matrix bmat(rank + 1, n);
    bmat.row(0) = Vector::Ones(n).transpose();
    bmat.bottomRows(rank) = xm.leftCols(rank).transpose();
    Eigen::JacobiSVD<Matrix> bsvd(bmat, Eigen::ComputeFullV);
    xm.rightCols(n - 1 - rank) = bsvd.matrixV().rightCols(n - 1 - rank);
  }

  Matrix u(n, n);
  u.col(0) = Vector::Constant(n, b);
  u.rightCols(n - 1) = xm * svd.matrixV().transpose();
  return u;
}

// ---------------------------------------------------------------------------
// Algorithm: alternate S-step and U-step until the relative objective
// decrease drops below rel_tol or max_iterations is reached.
// ---------------------------------------------------------------------------

inline TransformEstimate learn_transform(const SignalMatrix& signals,
                                         const TransformLearnConfig& config) {
  const int n = signals.n_nodes();
  if (config.bandwidth < 1 || config.bandwidth > n)
    throw std::invalid_argument("learn_transform: need 1 <= K <= N");
  if (config.max_iterations < 1)
    throw std::invalid_argument("learn_transform: max_iterations >= 1");

  Matrix u = config.init == TransformInit::householder_identity
                 ? householder_basis(n)
                 : random_feasible_basis(n, config.init_seed);

  TransformEstimate est;
  est.objective_trace.reserve(2 * config.max_iterations);
  // Objectives below this are numerically zero (squared-norm rounding noise).
  const double zero_floor = 16.0 * std::pow(2.22e-16, 2) * n *
                            signals.data.cols() * signals.data.squaredNorm();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iterations; ++it) {
    Matrix coeffs = u.transpose() * signals.data;
    auto [s, support] = block_sparse_projection(coeffs, config.bandwidth);
    est.objective_trace.push_back((coeffs - s).squaredNorm());

    u = u_step(signals, s, config.rank_tol_factor);
    const double obj = (u.transpose() * signals.data - s).squaredNorm();
    est.objective_trace.push_back(obj);

    est.s_hat = std::move(s);
    est.support = std::move(support);
    est.iterations = it + 1;
    if (obj <= zero_floor ||
        (std::isfinite(prev) &&
         prev - obj <= config.rel_tol * std::max(prev, 1e-300))) {
      est.converged = true;
      break;
    }
    prev = obj;
  }
  // Final S-step so (U, S) is a coherent pair for the returned U.
  auto [s, support] = block_sparse_projection(u.transpose() * signals.data,
                                              config.bandwidth);
  est.objective_trace.push_back((u.transpose() * signals.data - s).squaredNorm());
  est.s_hat = std::move(s);
  est.support = std::move(support);
  est.u_hat = std::move(u);
  return est;
}

// Columns of u_hat restricted to the support (the estimated partial basis).
inline Matrix support_basis(const TransformEstimate& est) {
  Matrix uk(est.u_hat.rows(), est.support.bandwidth());
  for (int c = 0; c < est.support.bandwidth(); ++c)
    uk.col(c) = est.u_hat.col(est.support.indices[c]);
  return uk;
}

// Rows of s_hat restricted to the support (K x M).
inline Matrix support_coefficients(const TransformEstimate& est) {
  Matrix sk(est.support.bandwidth(), est.s_hat.cols());
  for (int r = 0; r < est.support.bandwidth(); ++r)
    sk.row(r) = est.s_hat.row(est.support.indices[r]);
  return sk;
}

// ---------------------------------------------------------------------------
// Discrete-alphabet derotation: find an orthonormal K x K matrix H so that
// H * S_K lands on the alphabet, by alternating nearest-value quantization
// with the orthogonal Procrustes fit. Multi-start (identity first, then
// seeded random rotations); the best iterate is returned.
// ---------------------------------------------------------------------------

struct DerotationResult {
  Matrix rotation;        // H, K x K orthonormal
  Matrix coefficients;    // H * S_K
  Matrix basis;           // U_K * H'
  double quantization_error = 0.0;
  bool converged = false;
};

inline double quantize_to_alphabet(const Matrix& m, const std::vector<double>& alphabet,
                                   Matrix* quantized) {
  Matrix q(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double best = alphabet[0];
      for (double v : alphabet)
        if (std::abs(v - m(i, j)) < std::abs(best - m(i, j))) best = v;
      q(i, j) = best;
    }
  const double err = (m - q).norm();
  if (quantized) *quantized = std::move(q);
  return err;
}

inline DerotationResult derotate_discrete(const Matrix& u_k, const Matrix& s_k,
                                          const std::vector<double>& alphabet,
                                          int max_iter = 100,
                                          std::uint64_t seed = 0,
                                          int restarts = 60,
                                          double tol = 1e-8) {
  if (alphabet.size() < 2)
    throw std::invalid_argument("derotate_discrete: alphabet size >= 2");
  const int k = static_cast<int>(s_k.rows());
  if (u_k.cols() != k)
    throw std::invalid_argument("derotate_discrete: U_K / S_K shape mismatch");

  Rng rng(seed);
  Matrix best_h = Matrix::Identity(k, k);
  double best_err = quantize_to_alphabet(s_k, alphabet, nullptr);
  bool hit_tol = best_err <= tol;

  for (int attempt = 0; attempt <= restarts && !hit_tol; ++attempt) {
    Matrix h;
    if (attempt == 0) {
      h = Matrix::Identity(k, k);
    } else {
      Matrix g(k, k);
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) g(i, j) = rng.normal01();
      Eigen::HouseholderQR<Matrix> qr(g);
      h = qr.householderQ();
    }
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
      Matrix target;
      const double e = quantize_to_alphabet(h * s_k, alphabet, &target);
      if (e < best_err) {
        best_err = e;
        best_h = h;
      }
      if (e <= tol) break;
      if (std::isfinite(err) && err - e <= 1e-14 * std::max(1.0, err)) break;
      err = e;
      // Procrustes: argmin_{H orthonormal} ||H S_K - target||_F
      Eigen::JacobiSVD<Matrix> svd(target * s_k.transpose(),
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
      h = svd.matrixU() * svd.matrixV().transpose();
    }
    hit_tol = best_err <= tol;
  }

  DerotationResult res;
  res.rotation = best_h;
  res.coefficients = best_h * s_k;
  res.basis = u_k * best_h.transpose();
  res.quantization_error = best_err;
  res.converged = hit_tol;
  return res;
}

// Convenience overload acting on a learned estimate; the support columns of
// u_hat and rows of s_hat are replaced by their derotated versions. The
// derotated basis no longer pins the constant column in general.
inline TransformEstimate derotate_discrete(const TransformEstimate& est,
                                           const std::vector<double>& alphabet,
                                           int max_iter = 100,
                                           std::uint64_t seed = 0) {
  auto res = derotate_discrete(support_basis(est), support_coefficients(est),
                               alphabet, max_iter, seed);
  TransformEstimate out = est;
  for (int c = 0; c < est.support.bandwidth(); ++c) {
    out.u_hat.col(est.support.indices[c]) = res.basis.col(c);
    out.s_hat.row(est.support.indices[c]) = res.coefficients.row(c);
  }
  out.converged = res.converged;
  return out;
}

}  // namespace gtopo
