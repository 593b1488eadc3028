#include <gtopo/graph_core.hpp>
#include <gtopo/rng.hpp>
#include <gtopo/synthgen.hpp>
#include <gtopo/transform_learn.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <vector>

using namespace gtopo;
using Catch::Approx;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal01();
  return m;
}

// Exhaustive S-step oracle: best residual over all C(N, K) supports.
double best_support_residual(const Matrix& t, int k) {
  const int n = static_cast<int>(t.rows());
  std::vector<int> pick(k);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      double dropped = 0.0;
      std::vector<bool> keep(n, false);
      for (int idx : pick) keep[idx] = true;
      for (int i = 0; i < n; ++i)
        if (!keep[i]) dropped += t.row(i).squaredNorm();
      best = std::min(best, dropped);
      return;
    }
    for (int i = start; i <= n - (k - depth); ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return std::sqrt(best);
}

}  // namespace

TEST_CASE("block sparse projection basics") {
  SECTION("full bandwidth is the identity") {
    Rng rng(1);
    Matrix t = random_matrix(5, 4, rng);
    auto [s, support] = block_sparse_projection(t, 5);
    REQUIRE((s - t).norm() == 0.0);
    REQUIRE(support.bandwidth() == 5);
  }
  SECTION("hand-worked row-norm selection") {
    Matrix t(3, 2);
    t << 3, 0, 0, 2, 1, 0;
    auto [s, support] = block_sparse_projection(t, 2);
    Matrix expected(3, 2);
    expected << 3, 0, 0, 2, 0, 0;
    REQUIRE((s - expected).norm() == 0.0);
    REQUIRE(support.indices == std::vector<int>{0, 1});
  }
  SECTION("ties keep the lowest row index") {
    Matrix t = Matrix::Ones(4, 3);
    auto [s, support] = block_sparse_projection(t, 1);
    REQUIRE(support.indices == std::vector<int>{0});
    REQUIRE(s.row(0).isOnes());
    REQUIRE(s.bottomRows(3).isZero(0.0));
  }
  SECTION("K > N rejected") {
    REQUIRE_THROWS_AS(block_sparse_projection(Matrix::Zero(3, 2), 4),
                      std::invalid_argument);
  }
}

TEST_CASE("block sparse projection matches exhaustive support search") {
  Rng seeds(314);
  for (int t = 0; t < 50; ++t) {
    const int n = 4 + static_cast<int>(seeds.next_u64() % 5);  // up to 8
    const int k = 1 + static_cast<int>(seeds.next_u64() % 3);
    const int m = 2 + static_cast<int>(seeds.next_u64() % 4);
    Rng rng(seeds.next_u64());
    Matrix mat = random_matrix(n, m, rng);
    auto [s, support] = block_sparse_projection(mat, k);
    const double impl = (mat - s).norm();
    const double oracle = best_support_residual(mat, k);
    REQUIRE(impl == Approx(oracle).margin(1e-12));
  }
}

TEST_CASE("householder basis is feasible") {
  for (int n : {2, 3, 10, 31}) {
    Matrix u = householder_basis(n);
    REQUIRE((u.transpose() * u - Matrix::Identity(n, n)).norm() < 1e-12);
    const double b = 1.0 / std::sqrt(static_cast<double>(n));
    REQUIRE((u.col(0) - Vector::Constant(n, b)).norm() == 0.0);
  }
}

TEST_CASE("u_step: degenerate S") {
  Rng rng(8);
  SignalMatrix y{random_matrix(6, 4, rng)};
  Matrix u = u_step(y, Matrix::Zero(6, 4));
  REQUIRE((u - householder_basis(6)).norm() == 0.0);
}

TEST_CASE("u_step achieves zero objective on planted instances") {
  Rng seeds(21);
  for (int t = 0; t < 10; ++t) {
    const int n = 5 + static_cast<int>(seeds.next_u64() % 6);
    const int m = n + 2;
    Matrix u0 = random_feasible_basis(n, seeds.next_u64());
    Rng rng(seeds.next_u64());
    Matrix s0 = random_matrix(n, m, rng);
    s0.bottomRows(n - 3).setZero();
    SignalMatrix y{u0 * s0};
    Matrix u = u_step(y, s0);
    REQUIRE((u.transpose() * u - Matrix::Identity(n, n)).norm() < 1e-10);
    REQUIRE((u.transpose() * y.data - s0).norm() < 1e-8);
  }
}

TEST_CASE("u_step beats random feasible matrices") {
  Rng seeds(55);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 3 + static_cast<int>(seeds.next_u64() % 4);  // up to 6
    const int m = 2 + static_cast<int>(seeds.next_u64() % 5);
    Rng rng(seeds.next_u64());
    Matrix y = random_matrix(n, m, rng);
    Matrix s = random_matrix(n, m, rng);
    if (inst % 3 == 0) s.bottomRows(n / 2).setZero();
    Matrix ybar = y * s.transpose();
    Matrix u_opt = u_step(SignalMatrix{y}, s);
    const double t_opt = (u_opt.transpose() * ybar).trace();
    for (int r = 0; r < 10000; ++r) {
      Matrix q = random_feasible_basis(n, seeds.next_u64());
      const double t_rand = (q.transpose() * ybar).trace();
      REQUIRE(t_opt >= t_rand - 1e-9 * std::max(1.0, std::abs(t_opt)));
    }
  }
}

TEST_CASE("learn_transform on planted bandlimited data") {
  Rng seeds(9);
  for (int t = 0; t < 5; ++t) {
    const int n = 12;
    Matrix u0 = random_feasible_basis(n, seeds.next_u64());
    Rng rng(seeds.next_u64());
    Matrix s0 = Matrix::Zero(n, 40);
    for (int k = 0; k < 3; ++k)
      for (int m = 0; m < 40; ++m) s0(k, m) = rng.normal(1.0, std::sqrt(0.5));
    SignalMatrix y{u0 * s0};
    TransformLearnConfig cfg;
    cfg.bandwidth = 3;
    auto est = learn_transform(y, cfg);
    REQUIRE(est.objective() <= 1e-6 * y.data.squaredNorm());
    REQUIRE((est.u_hat.transpose() * est.u_hat - Matrix::Identity(n, n)).norm() <
            1e-8);
    const double b = 1.0 / std::sqrt(static_cast<double>(n));
    REQUIRE((est.u_hat.col(0) - Vector::Constant(n, b)).norm() == 0.0);
  }
}

TEST_CASE("learn_transform with K = N converges in one iteration to zero") {
  Rng rng(17);
  SignalMatrix y{random_matrix(7, 9, rng)};
  TransformLearnConfig cfg;
  cfg.bandwidth = 7;
  auto est = learn_transform(y, cfg);
  REQUIRE(est.objective() <= 1e-20 * y.data.squaredNorm());
  REQUIRE(est.iterations == 1);
}

TEST_CASE("objective trace is non-increasing over 100 seeded runs") {
  Rng seeds(2718);
  for (int t = 0; t < 100; ++t) {
    const int n = 6 + static_cast<int>(seeds.next_u64() % 10);
    const int m = 3 + static_cast<int>(seeds.next_u64() % 20);
    const int k = 1 + static_cast<int>(seeds.next_u64() % n);
    Rng rng(seeds.next_u64());
    SignalMatrix y{random_matrix(n, m, rng)};
    TransformLearnConfig cfg;
    cfg.bandwidth = k;
    cfg.init = t % 2 ? TransformInit::random_orthonormal
                     : TransformInit::householder_identity;
    cfg.init_seed = seeds.next_u64();
    auto est = learn_transform(y, cfg);
    // absolute floor: squared-norm rounding noise around an exactly-zero
    // objective (K = N runs)
    const double noise = 16.0 * std::pow(2.22e-16, 2) * n * m * y.data.squaredNorm();
    for (size_t i = 1; i < est.objective_trace.size(); ++i)
      REQUIRE(est.objective_trace[i] <= est.objective_trace[i - 1] +
                                            1e-12 * est.objective_trace[0] + noise);
  }
}

TEST_CASE("rotation ambiguity leaves the objective unchanged") {
  Rng seeds(31);
  for (int t = 0; t < 10; ++t) {
    const int n = 8;
    Rng rng(seeds.next_u64());
    SignalMatrix y{random_matrix(n, 12, rng)};
    TransformLearnConfig cfg;
    cfg.bandwidth = 3;
    auto est = learn_transform(y, cfg);

    // W: identity except a random rotation among the support rows > 0.
    std::vector<int> rot;
    for (int idx : est.support.indices)
      if (idx != 0) rot.push_back(idx);
    if (rot.size() < 2) continue;
    Matrix g = random_matrix(static_cast<int>(rot.size()),
                             static_cast<int>(rot.size()), rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix w = Matrix::Identity(n, n);
    for (size_t a = 0; a < rot.size(); ++a)
      for (size_t b = 0; b < rot.size(); ++b) w(rot[a], rot[b]) = q(a, b);

    const double before =
        (est.u_hat.transpose() * y.data - est.s_hat).squaredNorm();
    Matrix u2 = est.u_hat * w;
    Matrix s2 = w.transpose() * est.s_hat;
    const double after = (u2.transpose() * y.data - s2).squaredNorm();
    REQUIRE(after == Approx(before).margin(1e-9 * std::max(1.0, before)));
    // the rotated S keeps the block-sparsity
    for (int i = 0; i < n; ++i) {
      bool in_support = false;
      for (int idx : est.support.indices) in_support |= idx == i;
      if (!in_support) REQUIRE(s2.row(i).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("derotation") {
  SECTION("already on the alphabet is a fixed point") {
    Rng rng(5);
    Matrix s(2, 20);
    for (int j = 0; j < 20; ++j)
      for (int i = 0; i < 2; ++i)
        s(i, j) = 1.0 + static_cast<double>(rng.uniform_int(2));
    Matrix u_k = random_feasible_basis(6, 1).leftCols(2);
    auto res = derotate_discrete(u_k, s, {1.0, 2.0});
    REQUIRE(res.quantization_error <= 1e-12);
    REQUIRE((res.rotation - Matrix::Identity(2, 2)).norm() < 1e-12);
  }
  SECTION("planted rotation is undone up to row permutation/sign") {
    Rng seeds(99);
    int recovered = 0;
    for (int t = 0; t < 5; ++t) {
      Rng rng(seeds.next_u64());
      Matrix s0(2, 40);
      for (int j = 0; j < 40; ++j)
        for (int i = 0; i < 2; ++i)
          s0(i, j) = 1.0 + static_cast<double>(rng.uniform_int(2));
      Matrix g = random_matrix(2, 2, rng);
      Eigen::HouseholderQR<Matrix> qr(g);
      Matrix w = qr.householderQ();
      Matrix s_rot = w.transpose() * s0;
      Matrix u_k = random_feasible_basis(7, seeds.next_u64()).leftCols(2);
      auto res = derotate_discrete(u_k, s_rot, {1.0, 2.0}, 200, seeds.next_u64());
      REQUIRE(res.quantization_error <= 1e-6);
      // compare against all signed row permutations
      double best = std::numeric_limits<double>::infinity();
      for (int perm = 0; perm < 2; ++perm)
        for (int sa : {-1, 1})
          for (int sb : {-1, 1}) {
            Matrix cand(2, 40);
            cand.row(0) = sa * res.coefficients.row(perm);
            cand.row(1) = sb * res.coefficients.row(1 - perm);
            best = std::min(best, (cand - s0).norm());
          }
      if (best < 1e-6) ++recovered;
      // basis * coefficients is preserved by construction
      REQUIRE((res.basis * res.coefficients - u_k * s_rot).norm() < 1e-9);
    }
    REQUIRE(recovered >= 4);  // generic instances recover exactly
  }
  SECTION("empty alphabet rejected") {
    REQUIRE_THROWS_AS(derotate_discrete(Matrix::Identity(3, 2), Matrix::Zero(2, 4),
                                        std::vector<double>{}),
                      std::invalid_argument);
  }
}
