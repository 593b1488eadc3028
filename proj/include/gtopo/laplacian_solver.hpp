#pragma once

// Convex Laplacian recovery from a partial eigenbasis (TV-GL and ESA-GL)
// plus the Dong and Kalofolias baselines, all solved by one operator
// splitting (ADMM) engine over the half-vectorized edge-weight variable
// a = -vech(L). In that variable the Laplacian structure (symmetry, zero
// row sums, induced PSD-ness) is built in, the remaining constraints are
// linear equalities plus a >= 0, and every proximal step is closed form.
//
// Constraint forms for TV-GL / ESA-GL:
//   rotated_subspace   (I - Uk Uk') L Uk = 0 with C_K := Uk' L Uk
//                      (the estimated basis is known only up to rotation)
//   known_eigenvectors L u_k = lambda_k u_k with lambda unknowns appended
//                      to the variable (the identifiability system F x = b)

#include <gtopo/graph_core.hpp>
#include <gtopo/identifiability.hpp>
#include <gtopo/rng.hpp>

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cstdint>
#include <optional>
#ifdef GTOPO_POLISH_DEBUG
#include <cstdio>
#define GTOPO_PDBG(msg) std::fprintf(stderr, "polish: %s\n", msg)
#else
#define GTOPO_PDBG(msg) (void)0
#endif
#include <stdexcept>
#include <string>
#include <vector>

namespace gtopo {

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

// TV(L, Y) = sum_m sum_{i != j} a_ij |Y_im - Y_jm| over ordered pairs (each
// undirected edge counted twice).
inline double total_variation(const Graph& g, const SignalMatrix& y) {
  if (g.n_nodes() != y.n_nodes())
    throw std::invalid_argument("total_variation: dimension mismatch");
  double tv = 0.0;
  for (int j = 0; j < g.n_nodes(); ++j)
    for (int i = j + 1; i < g.n_nodes(); ++i)
      if (g.adjacency(i, j) != 0.0)
        tv += 2.0 * g.adjacency(i, j) *
              (y.data.row(i) - y.data.row(j)).cwiseAbs().sum();
  return tv;
}

// Weight interpretation a_ij = max(0, -L_ij); diagonal terms vanish.
inline double total_variation(const LaplacianMatrix& lap, const SignalMatrix& y) {
  return total_variation(adjacency_from_laplacian(lap.matrix), y);
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

enum class RecoveryVariant { tv_gl, esa_gl, dong, kalofolias };

inline const char* to_string(RecoveryVariant v) {
  switch (v) {
    case RecoveryVariant::tv_gl: return "tv_gl";
    case RecoveryVariant::esa_gl: return "esa_gl";
    case RecoveryVariant::dong: return "dong";
    case RecoveryVariant::kalofolias: return "kalofolias";
  }
  return "?";
}

inline RecoveryVariant recovery_variant_from_string(const std::string& s) {
  if (s == "tv_gl") return RecoveryVariant::tv_gl;
  if (s == "esa_gl") return RecoveryVariant::esa_gl;
  if (s == "dong") return RecoveryVariant::dong;
  if (s == "kalofolias") return RecoveryVariant::kalofolias;
  throw std::invalid_argument("unknown recovery method: " + s);
}

enum class BasisForm { rotated_subspace, known_eigenvectors };

struct RecoveryProblem {
  RecoveryVariant variant = RecoveryVariant::tv_gl;
  Matrix u_k;                  // N x K (tv_gl / esa_gl)
  SignalMatrix y;              // tv_gl, dong, kalofolias
  Matrix s_hat_k;              // K x M (esa_gl)
  double mu = 1.0;             // penalty (tv_gl / esa_gl / dong)
  double trace_target = 0.0;   // p; defaults to N when <= 0
  double alpha = 1.0;          // kalofolias
  double beta = 1.0;           // kalofolias
  BasisForm basis_form = BasisForm::rotated_subspace;
  bool esa_square_penalty = false;  // use mu ||L||_F^2 in ESA-GL
};

struct SolverConfig {
  double penalty = 1.0;        // initial splitting penalty, self-adaptive
  int max_iterations = 30000;
  double primal_tol = 1e-6;
  double dual_tol = 1e-6;
  double psd_eig_floor = 0.0;  // eigenvalue clip floor for the returned C_K
  std::uint64_t init_seed = 0; // nonzero: random splitting initialization
  bool adapt_penalty = true;
};

enum class SolveStatus { converged, max_iter, infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "?";
}

struct FeasibilityResiduals {
  double subspace = 0.0;  // ||L Uk - Uk C_K||_F
  double trace = 0.0;     // |tr(L) - p|
  double row_sum = 0.0;   // max |(L 1)_i|
  double sign = 0.0;      // largest positive off-diagonal
  double psd = 0.0;       // max(0, -lambda_min(C_K))

  double max() const {
    return std::max({subspace, trace, row_sum, sign, psd});
  }
};

inline FeasibilityResiduals feasibility_residuals(const Matrix& lap,
                                                  const Matrix& u_k, double p) {
  if (lap.rows() != lap.cols() || u_k.rows() != lap.rows())
    throw std::invalid_argument("feasibility_residuals: dimension mismatch");
  const int n = static_cast<int>(lap.rows());
  FeasibilityResiduals r;
  Matrix c = u_k.transpose() * lap * u_k;
  r.subspace = (lap * u_k - u_k * c).norm();
  r.trace = std::abs(lap.trace() - p);
  r.row_sum = (lap * Vector::Ones(n)).cwiseAbs().maxCoeff();
  double sign = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j) sign = std::max(sign, lap(i, j));
  r.sign = std::max(0.0, sign);
  if (c.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (c + c.transpose()),
                                             Eigen::EigenvaluesOnly);
    r.psd = std::max(0.0, -es.eigenvalues().minCoeff());
  }
  return r;
}

struct SolverState {
  Vector z_box, u_box;
  Vector z_norm, u_norm;
  Vector z_deg, u_deg;
  double rho = 1.0;
};

struct RecoveredGraph {
  LaplacianMatrix laplacian;
  Matrix c_k;           // K x K, eigen-clipped at psd_eig_floor
  Graph adjacency;      // max(0, -off-diagonals)
  FeasibilityResiduals residuals;
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  SolverState state;    // reusable as a warm start
};

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

namespace detail {

// Node-edge incidence of degrees: (R a)_v = sum of weights at node v.
inline Matrix degree_map(int n) {
  Matrix r = Matrix::Zero(n, vech_size(n));
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      const int e = edge_index(i, j, n);
      r(i, e) = 1.0;
      r(j, e) = 1.0;
    }
  return r;
}

// ||L(a)||_F^2 = a' H a with H = 2 I + R'R.
inline Matrix frobenius_gram(const Matrix& degree_map_r) {
  const int ne = static_cast<int>(degree_map_r.cols());
  return 2.0 * Matrix::Identity(ne, ne) +
         degree_map_r.transpose() * degree_map_r;
}

struct AssembledProblem {
  int n_nodes = 0;
  int n_edges = 0;
  int n_x = 0;      // n_edges (+ K - 1 in eigenvector form)
  Vector c;         // linear objective
  Matrix q_smooth;  // symmetric PSD quadratic objective term (may be empty)
  Matrix a_eq;      // compressed full-row-rank equalities
  Vector b_eq;
  bool eq_inconsistent = false;
  bool use_norm_block = false;  // mu ||L||_F via split variable
  double norm_weight = 0.0;
  bool use_deg_block = false;   // -alpha sum log degrees via split variable
  double deg_weight = 0.0;
  Matrix r_deg;     // N x E degree map
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double obj_scale = 1.0;  // internal objective multiplier (conditioning)
  double trace_target = 0.0;
  RecoveryVariant variant = RecoveryVariant::tv_gl;
  Matrix u_k;
};

inline void compress_equalities(const Matrix& a, const Vector& b,
                                AssembledProblem* out) {
  if (a.rows() == 0) {
    out->a_eq = Matrix(0, out->n_x);
    out->b_eq = Vector(0);
    return;
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut =
      sv.size() ? 1e-12 * sv[0] * std::max(a.rows(), a.cols()) : 0.0;
  int rank = 0;
  while (rank < sv.size() && sv[rank] > cut) ++rank;
  Matrix ur = svd.matrixU().leftCols(rank);
  // Orthonormal-row compression (A_c A_c' = I) keeps the KKT system well
  // scaled regardless of the raw constraint conditioning.
  out->a_eq = svd.matrixV().leftCols(rank).transpose();
  out->b_eq = (ur.transpose() * b).cwiseQuotient(sv.head(rank));
  // b outside range(A) means the equality system alone is inconsistent.
  out->eq_inconsistent =
      (b - ur * (ur.transpose() * b)).norm() > 1e-8 * std::max(1.0, b.norm());
}

inline Vector tv_weights(const SignalMatrix& y) {
  const int n = y.n_nodes();
  Vector c(vech_size(n));
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      c[edge_index(i, j, n)] =
          2.0 * (y.data.row(i) - y.data.row(j)).cwiseAbs().sum();
  return c;
}

inline Vector smoothness_weights(const SignalMatrix& y) {
  const int n = y.n_nodes();
  Vector c(vech_size(n));
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      c[edge_index(i, j, n)] = (y.data.row(i) - y.data.row(j)).squaredNorm();
  return c;
}

// Linear objective weights for <G, L(a)>: c_e = G_ii + G_jj - 2 G_ij.
inline Vector gram_weights(const Matrix& g) {
  const int n = static_cast<int>(g.rows());
  Vector c(vech_size(n));
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      c[edge_index(i, j, n)] = g(i, i) + g(j, j) - 2.0 * g(i, j);
  return c;
}

// Subspace-invariance rows (I - Uk Uk') L(a) Uk = 0 plus the trace row,
// over the edge variable.
inline void assemble_subspace_equalities(const Matrix& u_k, double p, int n,
                                         Matrix* a, Vector* b) {
  const int k = static_cast<int>(u_k.cols());
  const int ne = vech_size(n);
  *a = Matrix::Zero(k * n + 1, ne);
  *b = Vector::Zero(k * n + 1);
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      const int e = edge_index(i, j, n);
      Vector v = (u_k.row(i) - u_k.row(j)).transpose();  // Uk' (e_i - e_j)
      Vector q = -u_k * v;                               // (I - Uk Uk') w
      q[i] += 1.0;
      q[j] -= 1.0;
      for (int c = 0; c < k; ++c)
        for (int r = 0; r < n; ++r) (*a)(c * n + r, e) = q[r] * v[c];
    }
  a->row(k * n).setConstant(2.0);  // tr(L) = 2 sum(a) = p
  (*b)[k * n] = p;
}

inline AssembledProblem assemble(const RecoveryProblem& problem) {
  AssembledProblem ap;
  ap.variant = problem.variant;
  ap.mu = problem.mu;
  ap.alpha = problem.alpha;
  ap.beta = problem.beta;

  const bool needs_basis = problem.variant == RecoveryVariant::tv_gl ||
                           problem.variant == RecoveryVariant::esa_gl;
  const bool needs_y = problem.variant != RecoveryVariant::esa_gl;
  if (needs_y && problem.y.data.size() == 0)
    throw std::invalid_argument("recovery: this variant requires signals Y");
  if (needs_basis) {
    if (problem.u_k.size() == 0)
      throw std::invalid_argument("recovery: this variant requires U_K");
    check_orthonormal(problem.u_k);
  }

  const int n = needs_y ? problem.y.n_nodes()
                        : static_cast<int>(problem.u_k.rows());
  if (needs_basis && problem.u_k.rows() != n)
    throw std::invalid_argument("recovery: U_K / Y dimension mismatch");
  if (problem.mu < 0) throw std::invalid_argument("recovery: mu >= 0");

  ap.n_nodes = n;
  ap.n_edges = vech_size(n);
  ap.trace_target = problem.trace_target > 0 ? problem.trace_target
                                             : static_cast<double>(n);
  ap.r_deg = degree_map(n);
  ap.u_k = problem.u_k;

  const int k = static_cast<int>(problem.u_k.cols());
  const bool eigen_form = needs_basis &&
                          problem.basis_form == BasisForm::known_eigenvectors;
  ap.n_x = ap.n_edges + (eigen_form ? k - 1 : 0);

  // Signal-sum data terms are averaged per signal so that the penalty
  // coefficient means the same thing at any M (and matches the reported
  // robustness of the penalty sweep).
  const double m_norm =
      needs_y ? 1.0 / problem.y.n_signals()
              : (problem.s_hat_k.cols() > 0 ? 1.0 / problem.s_hat_k.cols() : 1.0);

  // Equalities.
  Matrix a_raw;
  Vector b_raw;
  switch (problem.variant) {
    case RecoveryVariant::tv_gl:
    case RecoveryVariant::esa_gl: {
      if (eigen_form) {
        auto sys = assemble_system(problem.u_k, ap.trace_target);
        a_raw = std::move(sys.f);
        b_raw = std::move(sys.b);
      } else {
        assemble_subspace_equalities(problem.u_k, ap.trace_target, n, &a_raw,
                                     &b_raw);
      }
      break;
    }
    case RecoveryVariant::dong: {
      a_raw = Matrix::Constant(1, ap.n_edges, 2.0);
      b_raw = Vector::Constant(1, ap.trace_target);
      break;
    }
    case RecoveryVariant::kalofolias: {
      a_raw = Matrix(0, ap.n_x);
      b_raw = Vector(0);
      break;
    }
  }
  if (a_raw.cols() < ap.n_x && a_raw.rows() > 0) {
    // pad columns for appended eigenvalue unknowns (subspace form never hits
    // this; the identifiability system is already full width)
    Matrix padded = Matrix::Zero(a_raw.rows(), ap.n_x);
    padded.leftCols(a_raw.cols()) = a_raw;
    a_raw = std::move(padded);
  }
  compress_equalities(a_raw, b_raw, &ap);

  // Objective.
  ap.c = Vector::Zero(ap.n_x);
  const Matrix h = frobenius_gram(ap.r_deg);
  switch (problem.variant) {
    case RecoveryVariant::tv_gl:
      ap.c.head(ap.n_edges) = m_norm * tv_weights(problem.y);
      ap.q_smooth = Matrix::Zero(ap.n_x, ap.n_x);
      ap.q_smooth.topLeftCorner(ap.n_edges, ap.n_edges) = problem.mu * h;
      break;
    case RecoveryVariant::esa_gl: {
      if (problem.s_hat_k.rows() != k)
        throw std::invalid_argument("recovery: esa_gl requires S_K with K rows");
      Matrix gram = problem.u_k * problem.s_hat_k * problem.s_hat_k.transpose() *
                    problem.u_k.transpose();
      ap.c.head(ap.n_edges) = m_norm * gram_weights(gram);
      if (problem.esa_square_penalty) {
        ap.q_smooth = Matrix::Zero(ap.n_x, ap.n_x);
        ap.q_smooth.topLeftCorner(ap.n_edges, ap.n_edges) = problem.mu * h;
      } else {
        ap.use_norm_block = problem.mu > 0;
        ap.norm_weight = problem.mu;
      }
      break;
    }
    case RecoveryVariant::dong:
      ap.c.head(ap.n_edges) = m_norm * smoothness_weights(problem.y);
      ap.q_smooth = problem.mu * h;
      break;
    case RecoveryVariant::kalofolias:
      if (problem.alpha <= 0 || problem.beta <= 0)
        throw std::invalid_argument("recovery: kalofolias needs alpha, beta > 0");
      ap.c.head(ap.n_edges) = 2.0 * m_norm * smoothness_weights(problem.y);
      ap.q_smooth = 2.0 * problem.beta * Matrix::Identity(ap.n_x, ap.n_x);
      ap.use_deg_block = true;
      ap.deg_weight = problem.alpha;
      break;
  }
  // Normalize the objective so the splitting penalty works at unit scale
  // regardless of the signal energy. Minimizing s*f is the same problem;
  // reported objective values are divided by s again.
  double magnitude = ap.c.cwiseAbs().maxCoeff();
  if (ap.q_smooth.size() > 0)
    magnitude = std::max(magnitude, ap.q_smooth.cwiseAbs().maxCoeff());
  if (ap.use_norm_block) magnitude = std::max(magnitude, ap.norm_weight);
  if (ap.use_deg_block) magnitude = std::max(magnitude, ap.deg_weight);
  if (magnitude > 0) {
    ap.obj_scale = 1.0 / magnitude;
    ap.c *= ap.obj_scale;
    if (ap.q_smooth.size() > 0) ap.q_smooth *= ap.obj_scale;
    ap.norm_weight *= ap.obj_scale;
    ap.deg_weight *= ap.obj_scale;
  }
  return ap;
}

// Scaled objective (the one the splitting minimizes).
inline double scaled_objective_at(const AssembledProblem& ap, const Vector& a) {
  const Matrix lap = laplacian_from_weights(a, ap.n_nodes);
  double obj = ap.c.head(ap.n_edges).dot(a);
  switch (ap.variant) {
    case RecoveryVariant::tv_gl:
    case RecoveryVariant::dong:
      obj += ap.obj_scale * ap.mu * lap.squaredNorm();
      break;
    case RecoveryVariant::esa_gl:
      obj += ap.obj_scale * ap.mu * lap.norm();
      break;
    case RecoveryVariant::kalofolias: {
      Vector deg = ap.r_deg * a;
      double logsum = 0.0;
      for (int i = 0; i < deg.size(); ++i)
        logsum += std::log(std::max(deg[i], 1e-300));
      obj += ap.obj_scale * (-ap.alpha * logsum + 2.0 * ap.beta * a.squaredNorm());
      break;
    }
  }
  return obj;
}

inline double objective_at(const AssembledProblem& ap, const Vector& a) {
  return scaled_objective_at(ap, a) / ap.obj_scale;
}

// Nonnegative least squares residual for the compressed equalities, used to
// distinguish "slow" from "structurally infeasible". FISTA on
// 0.5 ||A x - b||^2 with x >= 0.
inline double nonneg_eq_residual(const Matrix& a, const Vector& b, int iters = 4000) {
  if (a.rows() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const double lip = svd.singularValues()[0] * svd.singularValues()[0];
  if (lip <= 0) return b.norm();
  Vector x = Vector::Zero(a.cols()), v = x;
  double t = 1.0;
  for (int i = 0; i < iters; ++i) {
    Vector grad = a.transpose() * (a * v - b);
    Vector xn = (v - grad / lip).cwiseMax(0.0);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    v = xn + ((t - 1.0) / tn) * (xn - x);
    x = xn;
    t = tn;
  }
  return (a * x - b).norm();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ADMM engine
// ---------------------------------------------------------------------------

inline RecoveredGraph solve(const RecoveryProblem& problem,
                            const SolverConfig& config = {},
                            const SolverState* warm = nullptr) {
  using detail::AssembledProblem;
  AssembledProblem ap = detail::assemble(problem);
  const int n = ap.n_nodes;
  const int ne = ap.n_edges;
  const int nx = ap.n_x;
  const int n_eq = static_cast<int>(ap.a_eq.rows());
  const int k = static_cast<int>(ap.u_k.cols());

  RecoveredGraph out;
  auto finalize = [&](const Vector& a_part, SolveStatus status, int iters,
                      double rpri, double rdua) {
    Matrix lap = laplacian_from_weights(a_part, n);
    out.laplacian = LaplacianMatrix{lap, 1e-8};
    out.adjacency = adjacency_from_laplacian(lap);
    if (k > 0) {
      Matrix c = ap.u_k.transpose() * lap * ap.u_k;
      c = 0.5 * (c + c.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> es(c);
      Vector lam = es.eigenvalues().cwiseMax(config.psd_eig_floor);
      out.c_k = es.eigenvectors() * lam.asDiagonal() *
                es.eigenvectors().transpose();
      out.residuals = feasibility_residuals(lap, ap.u_k, ap.trace_target);
    } else {
      out.c_k = Matrix(0, 0);
      out.residuals = FeasibilityResiduals{};
      out.residuals.row_sum = (lap * Vector::Ones(n)).cwiseAbs().maxCoeff();
      if (ap.variant != RecoveryVariant::kalofolias)
        out.residuals.trace = std::abs(lap.trace() - ap.trace_target);
    }
    out.objective_value = detail::objective_at(ap, a_part);
    out.status = status;
    out.iterations = iters;
    out.primal_residual = rpri;
    out.dual_residual = rdua;
  };

  if (ap.eq_inconsistent) {
    finalize(Vector::Zero(ne), SolveStatus::infeasible, 0, 0, 0);
    return out;
  }

  // Splitting blocks: box on x, optionally v = T a (norm) and d = R a (log).
  const int n_norm = ap.use_norm_block ? ne + n : 0;
  const int n_deg = ap.use_deg_block ? n : 0;

  double rho = warm ? warm->rho : config.penalty;
  Vector z_box, u_box, z_norm, u_norm, z_deg, u_deg;
  if (warm && warm->z_box.size() == nx) {
    z_box = warm->z_box;
    u_box = warm->u_box;
    z_norm = warm->z_norm;
    u_norm = warm->u_norm;
    z_deg = warm->z_deg;
    u_deg = warm->u_deg;
  } else {
    z_box = Vector::Zero(nx);
    u_box = Vector::Zero(nx);
    z_norm = Vector::Zero(n_norm);
    u_norm = Vector::Zero(n_norm);
    z_deg = Vector::Zero(n_deg);
    u_deg = Vector::Zero(n_deg);
    if (config.init_seed != 0) {
      Rng rng(config.init_seed);
      const double scale = ap.trace_target > 0 ? ap.trace_target / (2.0 * ne) : 0.1;
      for (int i = 0; i < nx; ++i) {
        z_box[i] = scale * std::abs(rng.normal01());
        u_box[i] = 0.1 * scale * rng.normal01();
      }
    }
  }

  // KKT matrix [[2 Q + rho * S, A']; [A, 0]] with S = I (+ H on the a-part
  // for the norm block) (+ R'R on the a-part for the degree block).
  Matrix s_tt = Matrix::Identity(nx, nx);
  if (ap.use_norm_block)
    s_tt.topLeftCorner(ne, ne) += detail::frobenius_gram(ap.r_deg);
  if (ap.use_deg_block)
    s_tt.topLeftCorner(ne, ne) += ap.r_deg.transpose() * ap.r_deg;

  Eigen::PartialPivLU<Matrix> kkt;
  auto refactor = [&]() {
    Matrix g = Matrix::Zero(nx + n_eq, nx + n_eq);
    g.topLeftCorner(nx, nx) = rho * s_tt;
    if (ap.q_smooth.size() > 0) g.topLeftCorner(nx, nx) += 2.0 * ap.q_smooth;
    if (n_eq > 0) {
      g.topRightCorner(nx, n_eq) = ap.a_eq.transpose();
      g.bottomLeftCorner(n_eq, nx) = ap.a_eq;
    }
    kkt.compute(g);
  };
  refactor();

  auto norm_map = [&](const Vector& x) {
    Vector t(n_norm);
    t.head(ne) = std::sqrt(2.0) * x.head(ne);
    t.tail(n) = ap.r_deg * x.head(ne);
    return t;
  };

  Vector x = z_box;
  double rpri = 0.0, rdua = 0.0, eps_pri = 0.0, eps_dua = 0.0;
  int iter = 0;
  int next_polish = 50;
  int polish_backoff = 50;
  int polish_round_budget = 400;
  SolveStatus status = SolveStatus::max_iter;
  bool done = false;

  // Active-set polish: guesses the active (zero) set from the splitting
  // iterate and its duals, then iterates an exact face solve. Each face is
  // parameterized on the nullspace of its equality columns, so equality
  // feasibility holds by construction; infeasible faces release the pinned
  // coordinates most aligned with the infeasibility, negative frees get
  // pinned, and pinned coordinates with negative multipliers get released.
  // When the loop settles, the KKT conditions of the full convex program
  // hold and the point is certified globally optimal. The ESA-GL
  // Frobenius-norm term enters by reweighting (exact at the fixed point).
  const bool lp_mode = !ap.use_norm_block && !ap.use_deg_block &&
                       (ap.q_smooth.size() == 0 || ap.q_smooth.isZero(0.0));
  const Matrix h_gram = detail::frobenius_gram(ap.r_deg);
  auto try_polish = [&](Vector* a_out, bool* certified, int max_rounds,
                        bool dual_seeded) -> bool {
    *certified = false;
    if (ap.use_deg_block) return false;  // log prox has no quadratic face
    if (polish_round_budget <= 0) return false;

    std::vector<bool> is_free(nx);
    std::vector<int> release_count(nx, 0);
    int n_free0 = 0;
    for (int i = 0; i < nx; ++i) {
      is_free[i] = z_box[i] > 0.0 || (dual_seeded && u_box[i] > -1e-10);
      n_free0 += is_free[i];
    }
    // a face much larger than the equality row count cannot be the optimal
    // support of these programs; skip rather than burn dense solves
    if (n_free0 > std::min(nx, 4 * n_eq + 60)) return false;
    Vector x_try = Vector::Zero(nx);
    bool have_x = false;
    int reweights = 0;
    double tau = std::max(
        laplacian_from_weights(z_box.head(ne), n).norm(), 1e-12);
    const double scale = std::max(1.0, z_box.cwiseAbs().maxCoeff());

    for (int round = 0; round < max_rounds && polish_round_budget > 0; ++round) {
      --polish_round_budget;
      std::vector<int> free_idx;
      for (int i = 0; i < nx; ++i)
        if (is_free[i]) free_idx.push_back(i);
      const int nf = static_cast<int>(free_idx.size());
      if (nf == 0) return false;

      Matrix a_f(n_eq, nf);
      for (int c = 0; c < nf; ++c) a_f.col(c) = ap.a_eq.col(free_idx[c]);
      Vector c_f(nf);
      for (int c = 0; c < nf; ++c) c_f[c] = ap.c[free_idx[c]];
      Matrix q_f = Matrix::Zero(nf, nf);
      if (lp_mode) {
        // pure LP face: project the splitting point onto the equality set
        q_f = Matrix::Identity(nf, nf);
        for (int c = 0; c < nf; ++c) c_f[c] = -2.0 * z_box[free_idx[c]];
      } else if (ap.q_smooth.size() > 0) {
        for (int c = 0; c < nf; ++c)
          for (int r = 0; r < nf; ++r)
            q_f(r, c) = ap.q_smooth(free_idx[r], free_idx[c]);
      }
      if (ap.use_norm_block) {
        for (int c = 0; c < nf; ++c)
          for (int r = 0; r < nf; ++r)
            if (free_idx[r] < ne && free_idx[c] < ne)
              q_f(r, c) += 0.5 * ap.norm_weight / tau *
                           h_gram(free_idx[r], free_idx[c]);
      }

      // exact-feasibility face solve on the equality nullspace
      Vector x_p = Vector::Zero(nf);
      Matrix nullsp;
      int rank_f = 0;
      if (n_eq > 0) {
        Eigen::JacobiSVD<Matrix> svd(a_f,
                                     Eigen::ComputeThinU | Eigen::ComputeFullV);
        const Vector& sv = svd.singularValues();
        const double cut =
            sv.size() ? 1e-12 * std::max(sv[0], 1.0) * std::max<int>(n_eq, nf)
                      : 0.0;
        while (rank_f < sv.size() && sv[rank_f] > cut) ++rank_f;
        Vector proj = svd.matrixU().leftCols(rank_f).transpose() * ap.b_eq;
        x_p = svd.matrixV().leftCols(rank_f) *
              proj.cwiseQuotient(sv.head(rank_f));
        const double infeas = (a_f * x_p - ap.b_eq).norm();
        if (infeas > 1e-9 * std::max(1.0, ap.b_eq.norm())) {
          // face misses the equality set: release the pinned coordinates
          // most aligned with the leftover residual
          Vector resid = ap.b_eq - a_f * x_p;
          double best = 0.0;
          for (int i = 0; i < nx; ++i)
            if (!is_free[i])
              best = std::max(best, std::abs(ap.a_eq.col(i).dot(resid)));
          if (best <= 0.0) return false;
          bool released = false;
          for (int i = 0; i < nx; ++i)
            if (!is_free[i] &&
                std::abs(ap.a_eq.col(i).dot(resid)) >= 0.5 * best) {
              is_free[i] = true;
              released = true;
            }
          if (!released) { GTOPO_PDBG("stuck-infeasible"); return false; }
          continue;
        }
        nullsp = svd.matrixV().rightCols(nf - rank_f);
      } else {
        nullsp = Matrix::Identity(nf, nf);
      }

      Vector xf = x_p;
      if (nullsp.cols() > 0) {
        Matrix qn = nullsp.transpose() * (2.0 * q_f) * nullsp;
        qn.diagonal().array() += 1e-12;
        Vector rhs = -nullsp.transpose() * (c_f + 2.0 * q_f * x_p);
        Eigen::LDLT<Matrix> ldlt(qn);
        Vector w = ldlt.solve(rhs);
        if (!w.allFinite()) return false;
        xf = x_p + nullsp * w;
      }
      if (!xf.allFinite() || xf.cwiseAbs().maxCoeff() > 1e8 * scale)
        return false;

      // pin coordinates that crossed zero
      bool pinned = false;
      for (int c = 0; c < nf; ++c)
        if (xf[c] < -1e-9 * scale) {
          is_free[free_idx[c]] = false;
          pinned = true;
        }
      if (pinned) continue;

      x_try.setZero();
      for (int c = 0; c < nf; ++c) x_try[free_idx[c]] = std::max(xf[c], 0.0);
      have_x = true;
      const double tau_new =
          std::max(laplacian_from_weights(x_try.head(ne), n).norm(), 1e-12);
      if (ap.use_norm_block && std::abs(tau_new - tau) > 1e-9 * tau &&
          reweights < 40) {
        tau = tau_new;  // reweight the norm term and re-solve this face
        ++reweights;
        --round;
        continue;
      }
      if (lp_mode) break;  // projection carries no optimality certificate

      // multipliers: least-squares fit of the stationarity condition
      Vector grad_free = c_f;
      if (q_f.size() > 0) grad_free += 2.0 * q_f * xf;
      Vector nu = Vector::Zero(n_eq);
      if (n_eq > 0)
        nu = a_f.transpose()
                 .completeOrthogonalDecomposition()
                 .solve(-grad_free);
      Vector grad = ap.c;
      if (ap.q_smooth.size() > 0) grad += 2.0 * ap.q_smooth * x_try;
      if (ap.use_norm_block)
        grad.head(ne) += (ap.norm_weight / tau) * (h_gram * x_try.head(ne));
      if (n_eq > 0) grad += ap.a_eq.transpose() * nu;
      const double gmax = grad.cwiseAbs().maxCoeff();
      const double gtol = 1e-7 * (1.0 + gmax);
      // stationarity must actually hold on the free set
      bool stationary = true;
      for (int c = 0; c < nf && stationary; ++c)
        if (std::abs(grad[free_idx[c]]) > 1e3 * gtol) stationary = false;
      if (!stationary) { GTOPO_PDBG("nonstationary"); return false; }
      bool released = false;
      bool blocked_violation = false;
      for (int i = 0; i < nx; ++i)
        if (!is_free[i] && grad[i] < -gtol) {
          if (release_count[i] < 3) {
            is_free[i] = true;
            ++release_count[i];
            released = true;
          } else {
            blocked_violation = true;  // release budget spent, still negative
          }
        }
      if (released) continue;
      // a pinned coordinate with a negative multiplier means this point is
      // NOT optimal; without a clean certificate the attempt fails
      if (blocked_violation) { GTOPO_PDBG("blocked-violation"); return false; }
      *certified = true;
      break;
    }

    if (!have_x || x_try.isZero(0.0)) { GTOPO_PDBG("norounds"); return false; }
    if (n_eq > 0 &&
        (ap.a_eq * x_try - ap.b_eq).norm() >
            1e-7 * std::max(1.0, ap.b_eq.norm()))
      return false;
    // The KKT certificate already proves optimality; otherwise sanity-check
    // the objective against the splitting point (which sits slightly off the
    // equality set, so allow tolerance-scale slack).
    if (!*certified) {
      const double obj_polish = detail::scaled_objective_at(ap, x_try.head(ne));
      const double obj_admm = detail::scaled_objective_at(ap, z_box.head(ne));
      if (obj_polish > obj_admm + 1e-3 * (1.0 + std::abs(obj_admm)))
        return false;
    }
    *a_out = x_try;
    return true;
  };

  Vector z_box_prev = z_box, z_norm_prev = z_norm, z_deg_prev = z_deg;
  for (iter = 1; iter <= config.max_iterations && !done; ++iter) {
    // x-update: equality-constrained quadratic step.
    Vector rhs = Vector::Zero(nx + n_eq);
    rhs.head(nx) = rho * (z_box - u_box) - ap.c;
    if (ap.use_norm_block) {
      Vector w = z_norm - u_norm;
      rhs.head(ne) += rho * (std::sqrt(2.0) * w.head(ne) +
                             ap.r_deg.transpose() * w.tail(n));
    }
    if (ap.use_deg_block)
      rhs.head(ne) += rho * (ap.r_deg.transpose() * (z_deg - u_deg));
    if (n_eq > 0) rhs.tail(n_eq) = ap.b_eq;
    Vector sol = kkt.solve(rhs);
    x = sol.head(nx);

    // z-updates: closed-form projections / proxes, with over-relaxation.
    const double relax = 1.6;
    z_box_prev.swap(z_box);
    Vector x_hat = relax * x + (1.0 - relax) * z_box_prev;
    z_box = (x_hat + u_box).cwiseMax(0.0);
    Vector t_norm, t_deg;
    if (ap.use_norm_block) {
      t_norm = norm_map(x);
      z_norm_prev.swap(z_norm);
      Vector v = relax * t_norm + (1.0 - relax) * z_norm_prev + u_norm;
      const double vn = v.norm();
      const double shrink = vn > 0 ? std::max(0.0, 1.0 - ap.norm_weight / (rho * vn)) : 0.0;
      z_norm = shrink * v;
    }
    if (ap.use_deg_block) {
      t_deg = ap.r_deg * x.head(ne);
      z_deg_prev.swap(z_deg);
      Vector t = relax * t_deg + (1.0 - relax) * z_deg_prev + u_deg;
      for (int i = 0; i < n; ++i)
        z_deg[i] = std::max(
            0.5 * (t[i] + std::sqrt(t[i] * t[i] + 4.0 * ap.deg_weight / rho)),
            1e-8);
    }

    // dual updates (relaxed residuals).
    u_box += x_hat - z_box;
    if (ap.use_norm_block)
      u_norm += relax * t_norm + (1.0 - relax) * z_norm_prev - z_norm;
    if (ap.use_deg_block)
      u_deg += relax * t_deg + (1.0 - relax) * z_deg_prev - z_deg;

    // residuals.
    double r2 = (x - z_box).squaredNorm();
    double tx2 = x.squaredNorm(), z2 = z_box.squaredNorm();
    Vector dual_vec = rho * (z_box - z_box_prev);
    Vector udual = u_box;
    if (ap.use_norm_block) {
      r2 += (t_norm - z_norm).squaredNorm();
      tx2 += t_norm.squaredNorm();
      z2 += z_norm.squaredNorm();
      Vector dz = z_norm - z_norm_prev;
      dual_vec.head(ne) += rho * (std::sqrt(2.0) * dz.head(ne) +
                                  ap.r_deg.transpose() * dz.tail(n));
      udual.head(ne) += std::sqrt(2.0) * u_norm.head(ne) +
                        ap.r_deg.transpose() * u_norm.tail(n);
    }
    if (ap.use_deg_block) {
      r2 += (t_deg - z_deg).squaredNorm();
      tx2 += t_deg.squaredNorm();
      z2 += z_deg.squaredNorm();
      dual_vec.head(ne) += rho * (ap.r_deg.transpose() * (z_deg - z_deg_prev));
      udual.head(ne) += ap.r_deg.transpose() * u_deg;
    }
    rpri = std::sqrt(r2);
    rdua = dual_vec.norm();
    const int n_rows = nx + n_norm + n_deg;
    eps_pri = std::sqrt(static_cast<double>(n_rows)) * config.primal_tol +
              config.primal_tol * std::sqrt(std::max(tx2, z2));
    eps_dua = std::sqrt(static_cast<double>(nx)) * config.dual_tol +
              config.dual_tol * rho * udual.norm();

    // Periodic certified polish: once the active set has settled, the
    // pinned-multiplier check proves global optimality and we can stop early.
    // Failed attempts back off so stubborn instances are not dominated by
    // polish cost.
    if (iter >= next_polish && rpri <= 1e3 * eps_pri) {
      Vector polished;
      bool certified = false;
      if (try_polish(&polished, &certified, 30, true) && certified) {
        finalize(polished.head(ne), SolveStatus::converged, iter, rpri, rdua);
        SolverState st{z_box, u_box, z_norm, u_norm, z_deg, u_deg, rho};
        out.state = std::move(st);
        return out;
      }
      polish_backoff = std::min(2 * polish_backoff, 2000);
      next_polish = iter + polish_backoff;
    }

    // Residual-based acceptance: the splitting point is kept feasible on
    // signs and row sums by construction, so once the reported constraint
    // residuals are inside the contract the solve is done (polished when the
    // active set certifies).
    const bool admm_converged = rpri <= eps_pri && rdua <= eps_dua;
    if (admm_converged || iter % 100 == 0) {
      Matrix lap = laplacian_from_weights(z_box.head(ne), n);
      FeasibilityResiduals res =
          k > 0 ? feasibility_residuals(lap, ap.u_k, ap.trace_target)
                : FeasibilityResiduals{};
      const bool trace_free = ap.variant == RecoveryVariant::kalofolias;
      if (k == 0 && !trace_free)
        res.trace = std::abs(lap.trace() - ap.trace_target);
      const bool res_ok = res.max() <= 10.0 * config.primal_tol;
      if (admm_converged || (res_ok && rdua <= eps_dua && iter >= next_polish)) {
        Vector polished;
        bool certified = false;
        bool ok = try_polish(&polished, &certified, admm_converged ? 60 : 30, true);
        if (!ok)
          ok = try_polish(&polished, &certified, admm_converged ? 60 : 30, false);
        if (ok) {
          finalize(polished.head(ne), SolveStatus::converged, iter, rpri, rdua);
          SolverState st{z_box, u_box, z_norm, u_norm, z_deg, u_deg, rho};
          out.state = std::move(st);
          return out;
        }
        polish_backoff = std::min(2 * polish_backoff, 2000);
        next_polish = iter + polish_backoff;
        if (res_ok) {
          status = SolveStatus::converged;
          done = true;
        }
      }
    }

    // penalty adaptation with dual rescaling.
    if (config.adapt_penalty && !done && iter % 10 == 0) {
      if (rpri > 10.0 * rdua && rho < 1e6) {
        rho *= 2.0;
        u_box /= 2.0;
        u_norm /= 2.0;
        u_deg /= 2.0;
        refactor();
      } else if (rdua > 10.0 * rpri && rho > 1e-6) {
        rho /= 2.0;
        u_box *= 2.0;
        u_norm *= 2.0;
        u_deg *= 2.0;
        refactor();
      }
    }
  }

  // Ran out of iterations (or gave up tightening): decide between max_iter
  // and structural infeasibility.
  if (status != SolveStatus::converged &&
      rpri > 1e3 * std::max(eps_pri, 1e-12)) {
    const double nnls_res = detail::nonneg_eq_residual(ap.a_eq, ap.b_eq);
    if (nnls_res > 1e-6 * (1.0 + ap.b_eq.norm())) status = SolveStatus::infeasible;
  }
  finalize(z_box.head(ne), status, iter - 1, rpri, rdua);
  SolverState st{z_box, u_box, z_norm, u_norm, z_deg, u_deg, rho};
  out.state = std::move(st);
  return out;
}

}  // namespace gtopo
