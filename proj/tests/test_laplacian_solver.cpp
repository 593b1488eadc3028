#include <gtopo/graph_core.hpp>
#include <gtopo/laplacian_solver.hpp>
#include <gtopo/metrics.hpp>
#include <gtopo/synthgen.hpp>
#include <gtopo/transform_learn.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "oracle_qp.hpp"

using namespace gtopo;
using Catch::Approx;

namespace {

struct Planted {
  Graph graph;
  LaplacianMatrix laplacian;
  SpectralDecomposition decomp;
  SignalMatrix signals;
  Matrix u_k;
  Matrix s_k;
};

Planted plant_clustered(std::uint64_t seed, int clusters, int size, int k, int m,
                        bool require_connected = true, double p_intra = 0.8) {
  GraphModelSpec spec;
  spec.model = GraphModel::clustered;
  spec.n_clusters = clusters;
  spec.nodes_per_cluster = size;
  spec.p_intra = p_intra;
  spec.p_inter = 0.05;
  for (std::uint64_t s = seed;; ++s) {
    spec.seed = s;
    auto g = gen_graph(spec);
    if (require_connected && component_count(g) != 1) continue;
    Planted p;
    p.graph = g;
    p.laplacian = laplacian_from_adjacency(g);
    p.decomp = spectral_decomposition(p.laplacian);
    auto gen = gen_bandlimited(p.decomp, k, m, s + 1000003);
    p.signals = gen.signals;
    p.u_k = p.decomp.eigenvectors.leftCols(k);
    p.s_k = gen.coefficients.topRows(k);
    return p;
  }
}

}  // namespace

TEST_CASE("total variation") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  Graph g = make_graph(a);
  SECTION("hand case: ordered pairs double-count the edge") {
    Matrix y(2, 1);
    y << 0, 1;
    REQUIRE(total_variation(g, SignalMatrix{y}) == Approx(2.0));
  }
  SECTION("constant signal") {
    Matrix y = Matrix::Constant(2, 3, 4.2);
    REQUIRE(total_variation(g, SignalMatrix{y}) == Approx(0.0));
  }
  SECTION("empty graph") {
    Matrix y(3, 2);
    y << 1, 2, 3, 4, 5, 6;
    REQUIRE(total_variation(make_graph(Matrix::Zero(3, 3)), SignalMatrix{y}) ==
            Approx(0.0));
  }
}

TEST_CASE("feasibility residuals") {
  auto p = plant_clustered(3, 2, 5, 3, 12);
  const double tr = p.laplacian.matrix.trace();
  SECTION("exact membership") {
    auto r = feasibility_residuals(p.laplacian.matrix, p.u_k, tr);
    REQUIRE(r.max() < 1e-10);
  }
  SECTION("scaled Laplacian trips the trace") {
    auto r = feasibility_residuals(2.0 * p.laplacian.matrix, p.u_k, tr);
    REQUIRE(r.trace == Approx(tr));
  }
  SECTION("positive off-diagonal trips the sign") {
    Matrix bad = p.laplacian.matrix;
    bad(0, 1) = 0.5;
    bad(1, 0) = 0.5;
    auto r = feasibility_residuals(bad, p.u_k, tr);
    REQUIRE(r.sign == Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("tv-gl planted recovery with true partial basis") {
  auto p = plant_clustered(11, 2, 5, 3, 15, true, 1.0);
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::tv_gl;
  prob.u_k = p.u_k;
  prob.y = p.signals;
  prob.mu = 2.0;
  prob.trace_target = p.laplacian.matrix.trace();
  auto rec = solve(prob);
  REQUIRE(rec.status == SolveStatus::converged);
  REQUIRE(rec.residuals.max() <= 1e-5);
  REQUIRE(correlation_rho(p.laplacian.matrix, rec.laplacian.matrix) >= 0.9);
  REQUIRE(validate_laplacian(rec.laplacian.matrix, 1e-5).ok);
}

// With the full true eigenbasis the feasible set is the trace-normalized
// family U diag(0, lam) U' with valid sign pattern; the scaled truth is a
// member, and the solver must return a feasible point at least as good.
TEST_CASE("known-eigenvector form with full basis") {
  auto p = plant_clustered(21, 2, 3, 3, 10);
  const int n = p.graph.n_nodes();
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::tv_gl;
  prob.basis_form = BasisForm::known_eigenvectors;
  prob.u_k = p.decomp.eigenvectors;  // K = N
  prob.y = p.signals;
  prob.mu = 1.0;
  prob.trace_target = static_cast<double>(n);
  auto rec = solve(prob);
  REQUIRE(rec.status == SolveStatus::converged);
  // every eigenvector of the truth stays an eigenvector of the estimate
  REQUIRE(rec.residuals.max() < 1e-5);
  Matrix off = p.decomp.eigenvectors.transpose() * rec.laplacian.matrix *
               p.decomp.eigenvectors;
  off.diagonal().setZero();
  REQUIRE(off.cwiseAbs().maxCoeff() < 1e-5);
  // and the returned objective value does not exceed the scaled truth's
  Matrix scaled = p.laplacian.matrix * (n / p.laplacian.matrix.trace());
  const double obj_truth =
      total_variation(LaplacianMatrix{scaled}, p.signals) / p.signals.n_signals() +
      prob.mu * scaled.squaredNorm();
  REQUIRE(rec.objective_value <= obj_truth + 1e-5 * (1.0 + obj_truth));
}

TEST_CASE("edge count grows with mu in tv-gl") {
  auto p = plant_clustered(31, 2, 5, 3, 25);
  auto run = [&](double mu) {
    RecoveryProblem prob;
    prob.variant = RecoveryVariant::tv_gl;
    prob.u_k = p.u_k;
    prob.y = p.signals;
    prob.mu = mu;
    prob.trace_target = p.graph.n_nodes();
    auto rec = solve(prob);
    return rec.adjacency.n_edges(1e-6);
  };
  REQUIRE(run(0.0) <= run(10.0));
}

TEST_CASE("convexity: random splitting initializations agree") {
  auto p = plant_clustered(41, 2, 5, 3, 20);
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::tv_gl;
  prob.u_k = p.u_k;
  prob.y = p.signals;
  prob.mu = 1.0;
  prob.trace_target = p.graph.n_nodes();
  SolverConfig ca, cb;
  ca.init_seed = 1;
  cb.init_seed = 987654321;
  auto ra = solve(prob, ca);
  auto rb = solve(prob, cb);
  REQUIRE(ra.status == SolveStatus::converged);
  REQUIRE(rb.status == SolveStatus::converged);
  REQUIRE(ra.objective_value ==
          Approx(rb.objective_value).epsilon(1e-4).margin(1e-8));
}

TEST_CASE("solver matches the dense interior-point oracle") {
  Rng seeds(777);
  int count_tv = 0, count_esa = 0, count_dong = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int clusters = 2;
    const int size = 3 + static_cast<int>(seeds.next_u64() % 2);  // N = 6 or 8
    const int n = clusters * size;
    const int k = 2 + static_cast<int>(seeds.next_u64() % 2);
    auto p = plant_clustered(seeds.next_u64() % 100000, clusters, size, k, 15);
    const double mu = 0.1 + 2.0 * (inst % 4);
    const double pt = n;
    const int ne = vech_size(n);

    // independently rebuilt problem data
    Matrix h = oracle::frobenius_gram(n);
    Matrix a_eq;
    Vector b_eq;
    oracle::subspace_equalities(p.u_k, pt, &a_eq, &b_eq);

    const RecoveryVariant variant = inst % 3 == 0   ? RecoveryVariant::tv_gl
                                    : inst % 3 == 1 ? RecoveryVariant::esa_gl
                                                    : RecoveryVariant::dong;
    RecoveryProblem prob;
    prob.variant = variant;
    prob.mu = mu;
    prob.trace_target = pt;
    Vector c(ne);
    Vector x_star;
    if (variant == RecoveryVariant::tv_gl) {
      prob.u_k = p.u_k;
      prob.y = p.signals;
      for (int e = 0; e < ne; ++e) {
        auto [i, j] = edge_nodes(e, n);
        c[e] = 2.0 / p.signals.n_signals() *
               (p.signals.data.row(i) - p.signals.data.row(j)).cwiseAbs().sum();
      }
      x_star = oracle::solve_qp(c, mu * h, a_eq, b_eq);
      ++count_tv;
    } else if (variant == RecoveryVariant::esa_gl) {
      prob.u_k = p.u_k;
      prob.s_hat_k = p.s_k;
      Matrix gram = p.u_k * p.s_k * p.s_k.transpose() * p.u_k.transpose() /
                    static_cast<double>(p.s_k.cols());
      c = oracle::linear_weights_from_gram_matrix(gram);
      x_star = oracle::solve_norm_objective(c, mu, h, a_eq, b_eq);
      ++count_esa;
    } else {
      prob.y = p.signals;
      c = oracle::linear_weights_from_gram_matrix(
          p.signals.data * p.signals.data.transpose() /
          static_cast<double>(p.signals.n_signals()));
      Matrix trace_row = Matrix::Zero(1, ne);
      for (int e = 0; e < ne; ++e)
        trace_row(0, e) = oracle::edge_basis(e, n).trace();
      x_star = oracle::solve_qp(c, mu * h, trace_row, Vector::Constant(1, pt));
      ++count_dong;
    }

    auto rec = solve(prob);
    REQUIRE(rec.status == SolveStatus::converged);
    Vector a_impl = -vech_strict(rec.laplacian.matrix);
    REQUIRE((a_impl - x_star).cwiseAbs().maxCoeff() < 1e-3);

    double obj_star = c.dot(x_star);
    if (variant == RecoveryVariant::esa_gl)
      obj_star += mu * std::sqrt(x_star.dot(h * x_star));
    else
      obj_star += mu * x_star.dot(h * x_star);
    REQUIRE(rec.objective_value ==
            Approx(obj_star).epsilon(1e-4).margin(1e-6));
  }
  REQUIRE(count_tv >= 6);
  REQUIRE(count_esa >= 6);
  REQUIRE(count_dong >= 6);
}

TEST_CASE("converged outputs are valid Laplacians with PSD C_K") {
  Rng seeds(3131);
  for (int inst = 0; inst < 6; ++inst) {
    auto p = plant_clustered(seeds.next_u64() % 100000, 2, 5, 3, 20);
    RecoveryProblem prob;
    prob.variant = inst % 2 ? RecoveryVariant::esa_gl : RecoveryVariant::tv_gl;
    prob.u_k = p.u_k;
    if (prob.variant == RecoveryVariant::esa_gl)
      prob.s_hat_k = p.s_k;
    else
      prob.y = p.signals;
    prob.mu = 0.5;
    prob.trace_target = p.graph.n_nodes();
    auto rec = solve(prob);
    REQUIRE(rec.status == SolveStatus::converged);
    REQUIRE(validate_laplacian(rec.laplacian.matrix, 1e-5).ok);
    Eigen::SelfAdjointEigenSolver<Matrix> es(rec.c_k, Eigen::EigenvaluesOnly);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("dong baseline approaches uniform off-diagonals at large mu") {
  auto p = plant_clustered(51, 2, 5, 3, 15);
  auto signals = gen_bandlimited(p.decomp, 3, 15, 58).signals;
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::dong;
  prob.y = signals;
  prob.mu = 1e3;
  prob.trace_target = p.graph.n_nodes();
  auto rec = solve(prob);
  REQUIRE(rec.status == SolveStatus::converged);
  const int n = p.graph.n_nodes();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      const double v = std::abs(rec.laplacian.matrix(i, j));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  REQUIRE(hi / lo <= 1.1);
}

TEST_CASE("kalofolias baseline recovers modular structure") {
  auto p = plant_clustered(61, 2, 5, 3, 60);
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::kalofolias;
  prob.y = p.signals;
  prob.alpha = 1.0;
  prob.beta = 0.5;
  auto rec = solve(prob);
  REQUIRE(rec.status == SolveStatus::converged);
  REQUIRE(validate_laplacian(rec.laplacian.matrix, 1e-5).ok);
  // degrees strictly positive under the log barrier
  Vector deg = rec.adjacency.adjacency.rowwise().sum();
  REQUIRE(deg.minCoeff() > 0.0);
  REQUIRE(correlation_rho(p.laplacian.matrix, rec.laplacian.matrix) > 0.5);
}

TEST_CASE("structurally infeasible basis is reported") {
  // a random orthonormal K = N basis is not the eigenbasis of any Laplacian
  Rng rng(5);
  Matrix g(6, 6);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 6; ++i) g(i, j) = rng.normal01();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix u = qr.householderQ();
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::tv_gl;
  prob.basis_form = BasisForm::known_eigenvectors;
  prob.u_k = u;
  Matrix y = Matrix::Ones(6, 3) + g;
  prob.y = SignalMatrix{y};
  prob.mu = 1.0;
  prob.trace_target = 6.0;
  SolverConfig cfg;
  cfg.max_iterations = 2000;
  auto rec = solve(prob, cfg);
  REQUIRE(rec.status == SolveStatus::infeasible);
}

TEST_CASE("esa without coefficients is rejected") {
  auto p = plant_clustered(71, 2, 4, 2, 8);
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::esa_gl;
  prob.u_k = p.u_k.leftCols(2);
  prob.mu = 1.0;
  REQUIRE_THROWS_AS(solve(prob), std::invalid_argument);
}

TEST_CASE("warm start reaches the same solution faster") {
  auto p = plant_clustered(81, 2, 5, 3, 20);
  RecoveryProblem prob;
  prob.variant = RecoveryVariant::tv_gl;
  prob.u_k = p.u_k;
  prob.y = p.signals;
  prob.mu = 1.0;
  prob.trace_target = p.graph.n_nodes();
  auto cold = solve(prob);
  prob.mu = 1.5;
  auto step = solve(prob);
  auto warm = solve(prob, SolverConfig{}, &cold.state);
  REQUIRE(warm.status == SolveStatus::converged);
  REQUIRE(warm.objective_value ==
          Approx(step.objective_value).epsilon(1e-5).margin(1e-8));
}
