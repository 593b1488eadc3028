#pragma once

// Evaluation measures for recovered graphs: Laplacian entry correlation,
// normalized edge-recovery errors, data-driven binarization, and edge
// precision / recall / F-measure.

#include <gtopo/graph_core.hpp>

#include <set>
#include <stdexcept>
#include <utility>

namespace gtopo {

struct MetricsReport {
  double rho = 0.0;
  double e0 = 0.0;
  double ef = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double threshold_used = 0.0;
};

// Pearson correlation over all N^2 entries. The entry means are analytically
// zero for valid Laplacians but are subtracted anyway so that solver
// residuals do not bias the score.
inline double correlation_rho(const Matrix& l_true, const Matrix& l_est) {
  if (l_true.rows() != l_est.rows() || l_true.cols() != l_est.cols())
    throw std::invalid_argument("correlation_rho: dimension mismatch");
  const double mt = l_true.mean();
  const double me = l_est.mean();
  Matrix ct = l_true.array() - mt;
  Matrix ce = l_est.array() - me;
  const double vt = ct.squaredNorm();
  const double ve = ce.squaredNorm();
  if (vt <= 0.0 || ve <= 0.0)
    throw std::invalid_argument("correlation_rho: zero-variance input");
  return (ct.array() * ce.array()).sum() / std::sqrt(vt * ve);
}

// Edge kept iff a_ij > threshold, with threshold = half the mean estimated
// weight. The mean is taken over the N(N-1) off-diagonal entries by default
// (the diagonal is structurally zero); include_diagonal_in_mean switches to
// the all-entries convention.
inline double binarize_threshold(const Matrix& a_est,
                                 bool include_diagonal_in_mean = false) {
  const int n = static_cast<int>(a_est.rows());
  double sum = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j) sum += a_est(i, j);
  const double denom = include_diagonal_in_mean
                           ? static_cast<double>(n) * n
                           : static_cast<double>(n) * (n - 1);
  return 0.5 * sum / denom;
}

inline Graph binarize_adjacency(const Matrix& a_est,
                                bool include_diagonal_in_mean = false,
                                double* threshold_out = nullptr) {
  if (a_est.rows() != a_est.cols())
    throw std::invalid_argument("binarize_adjacency: matrix must be square");
  const int n = static_cast<int>(a_est.rows());
  const double thr = binarize_threshold(a_est, include_diagonal_in_mean);
  if (threshold_out) *threshold_out = thr;
  Matrix b = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j && a_est(i, j) > thr) b(i, j) = 1.0;
  // strict inequality: an all-zero estimate yields the empty graph
  return Graph{std::move(b)};
}

// e0 = ||A - Ab||_0 / (N(N-1)) on the binarized estimate,
// ef = ||A - Ahat||_F / (N(N-1)) on the raw weighted estimate.
inline std::pair<double, double> recovery_errors(const Graph& a_true,
                                                 const Matrix& a_est,
                                                 bool include_diagonal_in_mean = false,
                                                 double* threshold_out = nullptr) {
  const int n = a_true.n_nodes();
  if (a_est.rows() != n || a_est.cols() != n)
    throw std::invalid_argument("recovery_errors: dimension mismatch");
  Graph binary = binarize_adjacency(a_est, include_diagonal_in_mean, threshold_out);
  int miss = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j && ((a_true.adjacency(i, j) > 0) != (binary.adjacency(i, j) > 0)))
        ++miss;
  const double denom = static_cast<double>(n) * (n - 1);
  const double e0 = miss / denom;
  const double ef = (a_true.adjacency - a_est).norm() / denom;
  return {e0, ef};
}

using EdgeSet = std::set<std::pair<int, int>>;

inline EdgeSet edge_set(const Graph& g, double tol = 0.0) {
  EdgeSet edges;
  for (int j = 0; j < g.n_nodes(); ++j)
    for (int i = j + 1; i < g.n_nodes(); ++i)
      if (g.adjacency(i, j) > tol) edges.insert({j, i});
  return edges;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

inline PrecisionRecall precision_recall_f(const EdgeSet& ground,
                                          const EdgeSet& recovered) {
  if (ground.empty())
    throw std::invalid_argument("precision_recall_f: empty ground-truth set");
  int hits = 0;
  for (const auto& e : recovered)
    if (ground.count(e)) ++hits;
  PrecisionRecall pr;
  pr.precision = recovered.empty() ? 0.0 : static_cast<double>(hits) / recovered.size();
  pr.recall = static_cast<double>(hits) / ground.size();
  const double denom = pr.precision + pr.recall;
  pr.f_measure = denom > 0 ? 2.0 * pr.precision * pr.recall / denom : 0.0;
  return pr;
}

// Full report for a recovered Laplacian / adjacency pair against the ground
// truth graph.
inline MetricsReport evaluate_recovery(const Graph& truth, const Matrix& l_true,
                                       const Matrix& l_est, const Matrix& a_est,
                                       bool include_diagonal_in_mean = false) {
  MetricsReport rep;
  rep.rho = correlation_rho(l_true, l_est);
  auto [e0, ef] =
      recovery_errors(truth, a_est, include_diagonal_in_mean, &rep.threshold_used);
  rep.e0 = e0;
  rep.ef = ef;
  Graph binary = binarize_adjacency(a_est, include_diagonal_in_mean);
  auto pr = precision_recall_f(edge_set(truth), edge_set(binary));
  rep.precision = pr.precision;
  rep.recall = pr.recall;
  rep.f_measure = pr.f_measure;
  return rep;
}

}  // namespace gtopo
