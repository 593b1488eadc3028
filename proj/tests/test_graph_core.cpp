#include <gtopo/graph_core.hpp>
#include <gtopo/io.hpp>
#include <gtopo/rng.hpp>
#include <gtopo/synthgen.hpp>
#include <gtopo/transform_learn.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace gtopo;
using Catch::Approx;

TEST_CASE("vech indexing round trip") {
  const int n = 7;
  for (int e = 0; e < vech_size(n); ++e) {
    auto [i, j] = edge_nodes(e, n);
    REQUIRE(i > j);
    REQUIRE(edge_index(i, j, n) == e);
  }
}

TEST_CASE("laplacian from adjacency: definitional cases") {
  SECTION("2-node single edge") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = a(1, 0) = 1.0;
    auto lap = laplacian_from_adjacency(make_graph(a));
    Matrix expected(2, 2);
    expected << 1, -1, -1, 1;
    REQUIRE((lap.matrix - expected).norm() == 0.0);
  }
  SECTION("edgeless graph") {
    auto lap = laplacian_from_adjacency(make_graph(Matrix::Zero(3, 3)));
    REQUIRE(lap.matrix.isZero(0.0));
  }
  SECTION("3-node path with weight 2") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = a(1, 0) = 2.0;
    a(1, 2) = a(2, 1) = 2.0;
    auto lap = laplacian_from_adjacency(make_graph(a));
    Matrix expected(3, 3);
    expected << 2, -2, 0, -2, 4, -2, 0, -2, 2;
    REQUIRE((lap.matrix - expected).norm() == 0.0);
  }
}

TEST_CASE("validate_laplacian verdicts") {
  Matrix good(2, 2);
  good << 1, -1, -1, 1;
  REQUIRE(validate_laplacian(good, 1e-9).ok);

  Matrix positive_offdiag(2, 2);
  positive_offdiag << 1, 1, 1, 1;
  auto chk = validate_laplacian(positive_offdiag, 1e-9);
  REQUIRE_FALSE(chk.ok);
  REQUIRE(chk.sign_residual == Approx(1.0));

  Matrix bad_rowsum(2, 2);
  bad_rowsum << 1, -1, -1, 0.9;
  REQUIRE_FALSE(validate_laplacian(bad_rowsum, 1e-9).ok);

  REQUIRE_THROWS_AS(validate_laplacian(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("spectral decomposition small cases") {
  SECTION("zero Laplacian") {
    auto dec = spectral_decomposition(LaplacianMatrix{Matrix::Zero(2, 2)});
    REQUIRE(dec.eigenvalues[0] == Approx(0.0).margin(1e-14));
    REQUIRE(dec.eigenvalues[1] == Approx(0.0).margin(1e-14));
    REQUIRE((dec.eigenvectors.transpose() * dec.eigenvectors -
             Matrix::Identity(2, 2)).norm() < 1e-12);
  }
  SECTION("2-node edge") {
    Matrix lap(2, 2);
    lap << 1, -1, -1, 1;
    auto dec = spectral_decomposition(LaplacianMatrix{lap});
    REQUIRE(dec.eigenvalues[0] == Approx(0.0).margin(1e-12));
    REQUIRE(dec.eigenvalues[1] == Approx(2.0));
    const double s = 1.0 / std::sqrt(2.0);
    REQUIRE(dec.eigenvectors(0, 0) == Approx(s));
    REQUIRE(dec.eigenvectors(1, 0) == Approx(s));
    // sign convention: largest-magnitude entry positive, first index on ties
    REQUIRE(dec.eigenvectors(0, 1) == Approx(s));
    REQUIRE(dec.eigenvectors(1, 1) == Approx(-s));
  }
  SECTION("complete graph K3") {
    Matrix a = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
    auto dec = spectral_decomposition(laplacian_from_adjacency(make_graph(a)));
    REQUIRE(dec.eigenvalues[0] == Approx(0.0).margin(1e-12));
    REQUIRE(dec.eigenvalues[1] == Approx(3.0));
    REQUIRE(dec.eigenvalues[2] == Approx(3.0));
  }
}

TEST_CASE("spectral decomposition reconstruction and kernel vector") {
  Rng seeds(77);
  for (int t = 0; t < 20; ++t) {
    GraphModelSpec spec;
    spec.model = GraphModel::erdos_renyi;
    spec.n = 12;
    spec.p = 0.6;
    spec.seed = seeds.next_u64();
    auto g = gen_graph(spec);
    auto lap = laplacian_from_adjacency(g);
    auto dec = spectral_decomposition(lap);
    REQUIRE((lap.matrix - dec.eigenvectors * dec.eigenvalues.asDiagonal() *
                              dec.eigenvectors.transpose()).norm() <
            1e-12 * 12 * std::max(1.0, lap.matrix.norm()));
    if (component_count(g) == 1) {
      Vector ones = Vector::Constant(12, 1.0 / std::sqrt(12.0));
      REQUIRE((dec.eigenvectors.col(0) - ones).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("zero eigenvalue count equals component count") {
  Rng seeds(2024);
  for (int t = 0; t < 200; ++t) {
    GraphModelSpec spec;
    spec.model = GraphModel::erdos_renyi;
    spec.n = 10 + static_cast<int>(seeds.next_u64() % 8);
    spec.p = 0.12;
    spec.seed = seeds.next_u64();
    auto g = gen_graph(spec);
    auto dec = spectral_decomposition(laplacian_from_adjacency(g));
    int small = 0;
    for (int i = 0; i < dec.eigenvalues.size(); ++i)
      if (dec.eigenvalues[i] < 1e-8) ++small;
    REQUIRE(small == component_count(g));
  }
}

TEST_CASE("generated Laplacians pass validation") {
  Rng seeds(5);
  for (int t = 0; t < 100; ++t) {
    GraphModelSpec spec;
    spec.model = GraphModel::clustered;
    spec.n_clusters = 3;
    spec.nodes_per_cluster = 5;
    spec.weighted = t % 2 == 0;
    spec.seed = seeds.next_u64();
    auto lap = laplacian_from_adjacency(gen_graph(spec));
    REQUIRE(validate_laplacian(lap.matrix, 1e-12).ok);
  }
}

TEST_CASE("gft basics and round trip") {
  SECTION("identity basis") {
    Matrix y(3, 2);
    y << 1, 2, 3, 4, 5, 6;
    REQUIRE((gft(SignalMatrix{y}, Matrix::Identity(3, 3)) - y).norm() == 0.0);
  }
  SECTION("basis column maps to canonical coefficient") {
    Matrix a = Matrix::Ones(4, 4) - Matrix::Identity(4, 4);
    auto dec = spectral_decomposition(laplacian_from_adjacency(make_graph(a)));
    Matrix y = dec.eigenvectors.col(2);
    Matrix coeff = gft(SignalMatrix{y}, dec.eigenvectors);
    Vector expected = Vector::Zero(4);
    expected[2] = 1.0;
    REQUIRE((coeff - expected).norm() < 1e-12);
  }
  SECTION("norm preservation and round trip, 100 seeded cases") {
    Rng seeds(99);
    for (int t = 0; t < 100; ++t) {
      const int n = 4 + static_cast<int>(seeds.next_u64() % 8);
      Rng rng(seeds.next_u64());
      Matrix y(n, 3);
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < n; ++i) y(i, j) = rng.normal01();
      Matrix u = random_feasible_basis(n, seeds.next_u64());
      Matrix coeff = gft(SignalMatrix{y}, u);
      REQUIRE(coeff.norm() == Approx(y.norm()).epsilon(1e-10));
      REQUIRE((igft(coeff, u) - y).norm() < 1e-10 * y.norm());
    }
  }
  SECTION("dimension mismatch") {
    REQUIRE_THROWS_AS(gft(SignalMatrix{Matrix::Zero(3, 2).eval()},
                          Matrix::Identity(4, 4)),
                      std::invalid_argument);
  }
}

TEST_CASE("bandlimiting projector") {
  SECTION("full support gives identity") {
    Matrix u = random_feasible_basis(5, 3);
    auto proj = bandlimiting_projector(u, make_support({0, 1, 2, 3, 4}, 5));
    REQUIRE((proj - Matrix::Identity(5, 5)).norm() < 1e-12);
  }
  SECTION("empty support is rejected") {
    REQUIRE_THROWS_AS(make_support({}, 5), std::invalid_argument);
  }
  SECTION("identity basis, single index") {
    auto proj = bandlimiting_projector(Matrix::Identity(3, 3), make_support({0}, 3));
    Matrix expected = Matrix::Zero(3, 3);
    expected(0, 0) = 1.0;
    REQUIRE((proj - expected).norm() == 0.0);
  }
  SECTION("projector property on 100 seeded cases") {
    Rng seeds(11);
    for (int t = 0; t < 100; ++t) {
      const int n = 3 + static_cast<int>(seeds.next_u64() % 10);
      Matrix u = random_feasible_basis(n, seeds.next_u64());
      const int k = 1 + static_cast<int>(seeds.next_u64() % n);
      std::vector<int> idx(k);
      std::iota(idx.begin(), idx.end(), 0);
      auto proj = bandlimiting_projector(u, make_support(idx, n));
      REQUIRE((proj * proj - proj).norm() < 1e-10);
      REQUIRE((proj - proj.transpose()).norm() < 1e-12);
    }
  }
  SECTION("out of range support") {
    REQUIRE_THROWS_AS(make_support({7}, 5), std::invalid_argument);
  }
}

TEST_CASE("matrix and edge list text round trips") {
  Rng rng(42);
  Matrix m(4, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 4; ++i) m(i, j) = rng.normal01() * 1e3;
  std::stringstream ss;
  write_matrix(ss, m);
  Matrix back = read_matrix(ss, "test");
  REQUIRE((m - back).norm() == 0.0);

  GraphModelSpec spec;
  spec.model = GraphModel::erdos_renyi;
  spec.n = 9;
  spec.p = 0.4;
  spec.weighted = true;
  spec.seed = 3;
  auto g = gen_graph(spec);
  std::stringstream es;
  write_edge_list(es, g);
  Graph gback = read_edge_list(es, "test");
  REQUIRE((g.adjacency - gback.adjacency).norm() == 0.0);
}
