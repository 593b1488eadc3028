#pragma once

// Seeded generators for synthetic graphs (clustered, Erdos-Renyi,
// Barabasi-Albert) and the four graph-signal models used by the benchmark
// harness. Every generator is a pure function of (spec, seed).

#include <gtopo/graph_core.hpp>
#include <gtopo/rng.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtopo {

enum class GraphModel { clustered, erdos_renyi, barabasi_albert };

struct GraphModelSpec {
  GraphModel model = GraphModel::clustered;
  // clustered
  int n_clusters = 3;
  int nodes_per_cluster = 10;
  double p_intra = 0.7;
  double p_inter = 0.01;
  // erdos_renyi
  int n = 30;
  double p = 0.3;
  // barabasi_albert: complete clique on m0 seed nodes, then m edges per
  // arriving node by preferential attachment.
  int m0 = 4;
  int m = 3;
  // weights: unit by default, Uniform(0.5, 1.5) when weighted is set
  bool weighted = false;
  std::uint64_t seed = 0;

  int n_nodes() const {
    return model == GraphModel::clustered ? n_clusters * nodes_per_cluster : n;
  }
};

inline const char* to_string(GraphModel m) {
  switch (m) {
    case GraphModel::clustered: return "clustered";
    case GraphModel::erdos_renyi: return "erdos_renyi";
    case GraphModel::barabasi_albert: return "barabasi_albert";
  }
  return "?";
}

inline GraphModel graph_model_from_string(const std::string& s) {
  if (s == "clustered") return GraphModel::clustered;
  if (s == "erdos_renyi" || s == "er") return GraphModel::erdos_renyi;
  if (s == "barabasi_albert" || s == "ba") return GraphModel::barabasi_albert;
  throw std::invalid_argument("unknown graph model: " + s);
}

inline void validate(const GraphModelSpec& spec) {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  switch (spec.model) {
    case GraphModel::clustered:
      if (spec.n_clusters < 1 || spec.nodes_per_cluster < 1)
        throw std::invalid_argument("clustered: sizes must be positive");
      if (!prob_ok(spec.p_intra) || !prob_ok(spec.p_inter))
        throw std::invalid_argument("clustered: probabilities must be in [0,1]");
      break;
    case GraphModel::erdos_renyi:
      if (spec.n < 1) throw std::invalid_argument("er: n must be positive");
      if (!prob_ok(spec.p)) throw std::invalid_argument("er: p must be in [0,1]");
      break;
    case GraphModel::barabasi_albert:
      if (!(spec.m >= 1 && spec.m <= spec.m0 && spec.m0 < spec.n))
        throw std::invalid_argument("ba: need 1 <= m <= m0 < N");
      break;
  }
}

inline Graph gen_graph(const GraphModelSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const int n = spec.n_nodes();
  Matrix adj = Matrix::Zero(n, n);
  auto add_edge = [&](int i, int j) {
    const double w = spec.weighted ? rng.uniform(0.5, 1.5) : 1.0;
    adj(i, j) = w;
    adj(j, i) = w;
  };
  switch (spec.model) {
    case GraphModel::clustered: {
      for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i) {
          const bool same =
              i / spec.nodes_per_cluster == j / spec.nodes_per_cluster;
          const double p = same ? spec.p_intra : spec.p_inter;
          if (rng.uniform01() < p) add_edge(i, j);
        }
      break;
    }
    case GraphModel::erdos_renyi: {
      for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i)
          if (rng.uniform01() < spec.p) add_edge(i, j);
      break;
    }
    case GraphModel::barabasi_albert: {
      std::vector<int> degree(n, 0);
      for (int j = 0; j < spec.m0; ++j)
        for (int i = j + 1; i < spec.m0; ++i) {
          add_edge(i, j);
          ++degree[i];
          ++degree[j];
        }
      for (int v = spec.m0; v < n; ++v) {
        std::vector<int> targets;
        int deg_sum = 0;
        for (int i = 0; i < v; ++i) deg_sum += degree[i];
        while (static_cast<int>(targets.size()) < spec.m) {
          // degree-proportional draw over existing nodes; isolated seed
          // nodes (degree 0, only possible when m0 == 1) fall back to uniform
          int pick = -1;
          if (deg_sum == 0) {
            pick = static_cast<int>(rng.uniform_int(v));
          } else {
            int ticket = static_cast<int>(rng.uniform_int(deg_sum));
            for (int i = 0; i < v; ++i) {
              ticket -= degree[i];
              if (ticket < 0) {
                pick = i;
                break;
              }
            }
          }
          bool dup = false;
          for (int t : targets) dup = dup || t == pick;
          if (!dup) targets.push_back(pick);
        }
        for (int t : targets) {
          add_edge(v, t);
          ++degree[v];
          ++degree[t];
        }
      }
      break;
    }
  }
  return Graph{std::move(adj)};
}

// ---------------------------------------------------------------------------
// Signal models
// ---------------------------------------------------------------------------

enum class SignalModel { bandlimited, compressible, inverse_laplacian, discrete_alphabet };

inline const char* to_string(SignalModel m) {
  switch (m) {
    case SignalModel::bandlimited: return "bandlimited";
    case SignalModel::compressible: return "compressible";
    case SignalModel::inverse_laplacian: return "inverse_laplacian";
    case SignalModel::discrete_alphabet: return "discrete_alphabet";
  }
  return "?";
}

inline SignalModel signal_model_from_string(const std::string& s) {
  if (s == "bandlimited") return SignalModel::bandlimited;
  if (s == "compressible") return SignalModel::compressible;
  if (s == "inverse_laplacian") return SignalModel::inverse_laplacian;
  if (s == "discrete_alphabet") return SignalModel::discrete_alphabet;
  throw std::invalid_argument("unknown signal model: " + s);
}

struct SignalModelSpec {
  SignalModel model = SignalModel::bandlimited;
  int bandwidth = 3;      // K (bandlimited/discrete) or K_v (compressible)
  double beta = 2.0;      // compressible decay
  int alphabet_size = 2;  // discrete alphabet {1..alphabet_size}
  int n_signals = 15;     // M
  // Gaussian coefficient law for bandlimited/compressible heads. The
  // default reads N(1, 0.5) as mean 1, variance 0.5; set sigma_is_stddev
  // to reinterpret 0.5 as the standard deviation.
  double coeff_mean = 1.0;
  double coeff_var = 0.5;
  bool sigma_is_stddev = false;
  bool random_tail_sign = false;  // compressible only
  std::uint64_t seed = 0;

  double coeff_stddev() const {
    return sigma_is_stddev ? coeff_var : std::sqrt(coeff_var);
  }
};

struct GeneratedSignals {
  SignalMatrix signals;      // Y = U * S
  Matrix coefficients;       // S (N x M)
  SupportSet support;        // nonzero rows of S
};

// K-bandlimited signals: rows 0..K-1 of S (smallest-eigenvalue indices)
// drawn i.i.d. Gaussian, the rest exactly zero.
inline GeneratedSignals gen_bandlimited(const SpectralDecomposition& decomp,
                                        int bandwidth, int n_signals,
                                        std::uint64_t seed, double mean = 1.0,
                                        double stddev = std::sqrt(0.5)) {
  const int n = decomp.n_nodes();
  if (bandwidth < 1 || bandwidth > n)
    throw std::invalid_argument("gen_bandlimited: need 1 <= K <= N");
  if (n_signals < 1) throw std::invalid_argument("gen_bandlimited: M >= 1");
  Rng rng(seed);
  Matrix coeffs = Matrix::Zero(n, n_signals);
  for (int k = 0; k < bandwidth; ++k)
    for (int m = 0; m < n_signals; ++m) coeffs(k, m) = rng.normal(mean, stddev);
  std::vector<int> idx(bandwidth);
  std::iota(idx.begin(), idx.end(), 0);
  return GeneratedSignals{SignalMatrix{decomp.eigenvectors * coeffs}, coeffs,
                          make_support(idx, n)};
}

// Compressible signals: Gaussian head on k <= K_v, power-law tail of
// magnitude (K_v / k)^(2 beta) for k > K_v (1-based k). The tail values are
// deterministic by default; random_tail_sign draws a Rademacher sign per
// entry so the tail energy is spread over independent directions instead of
// one common component.
inline SignalMatrix gen_compressible(const SpectralDecomposition& decomp, int k_v,
                                     double beta, int n_signals,
                                     std::uint64_t seed, double mean = 1.0,
                                     double stddev = std::sqrt(0.5),
                                     bool random_tail_sign = false) {
  const int n = decomp.n_nodes();
  if (k_v < 1 || k_v > n)
    throw std::invalid_argument("gen_compressible: need 1 <= K_v <= N");
  if (beta <= 0) throw std::invalid_argument("gen_compressible: beta > 0");
  if (n_signals < 1) throw std::invalid_argument("gen_compressible: M >= 1");
  Rng rng(seed);
  Matrix coeffs(n, n_signals);
  for (int m = 0; m < n_signals; ++m)
    for (int k = 0; k < n; ++k) {
      if (k < k_v) {
        coeffs(k, m) = rng.normal(mean, stddev);
      } else {
        coeffs(k, m) = std::pow(static_cast<double>(k_v) / (k + 1), 2.0 * beta);
        if (random_tail_sign && rng.uniform01() < 0.5) coeffs(k, m) = -coeffs(k, m);
      }
    }
  return SignalMatrix{decomp.eigenvectors * coeffs};
}

// GMRF signals with covariance pinv(Lambda): coefficient k ~ N(0, 1/lambda_k)
// for lambda_k > 1e-10, identically zero on the Laplacian kernel.
inline SignalMatrix gen_inverse_laplacian(const SpectralDecomposition& decomp,
                                          int n_signals, std::uint64_t seed) {
  const int n = decomp.n_nodes();
  if (n_signals < 1)
    throw std::invalid_argument("gen_inverse_laplacian: M >= 1");
  Rng rng(seed);
  Matrix coeffs = Matrix::Zero(n, n_signals);
  for (int m = 0; m < n_signals; ++m)
    for (int k = 0; k < n; ++k)
      if (decomp.eigenvalues[k] > 1e-10)
        coeffs(k, m) = rng.normal(0.0, 1.0 / std::sqrt(decomp.eigenvalues[k]));
  return SignalMatrix{decomp.eigenvectors * coeffs};
}

// Bandlimited signals whose support coefficients take values uniformly from
// the alphabet {1, 2, ..., alphabet_size}.
inline GeneratedSignals gen_discrete_alphabet(const SpectralDecomposition& decomp,
                                              int bandwidth, int alphabet_size,
                                              int n_signals, std::uint64_t seed) {
  const int n = decomp.n_nodes();
  if (bandwidth < 1 || bandwidth > n)
    throw std::invalid_argument("gen_discrete_alphabet: need 1 <= K <= N");
  if (alphabet_size < 2)
    throw std::invalid_argument("gen_discrete_alphabet: alphabet_size >= 2");
  if (n_signals < 1) throw std::invalid_argument("gen_discrete_alphabet: M >= 1");
  Rng rng(seed);
  Matrix coeffs = Matrix::Zero(n, n_signals);
  for (int k = 0; k < bandwidth; ++k)
    for (int m = 0; m < n_signals; ++m)
      coeffs(k, m) = 1.0 + static_cast<double>(rng.uniform_int(alphabet_size));
  std::vector<int> idx(bandwidth);
  std::iota(idx.begin(), idx.end(), 0);
  return GeneratedSignals{SignalMatrix{decomp.eigenvectors * coeffs}, coeffs,
                          make_support(idx, n)};
}

inline SignalMatrix gen_signals(const SignalModelSpec& spec,
                                const SpectralDecomposition& decomp,
                                Matrix* coefficients = nullptr) {
  switch (spec.model) {
    case SignalModel::bandlimited: {
      auto g = gen_bandlimited(decomp, spec.bandwidth, spec.n_signals, spec.seed,
                               spec.coeff_mean, spec.coeff_stddev());
      if (coefficients) *coefficients = g.coefficients;
      return g.signals;
    }
    case SignalModel::compressible: {
      auto y = gen_compressible(decomp, spec.bandwidth, spec.beta, spec.n_signals,
                                spec.seed, spec.coeff_mean, spec.coeff_stddev(),
                                spec.random_tail_sign);
      if (coefficients) *coefficients = decomp.eigenvectors.transpose() * y.data;
      return y;
    }
    case SignalModel::inverse_laplacian: {
      auto y = gen_inverse_laplacian(decomp, spec.n_signals, spec.seed);
      if (coefficients) *coefficients = decomp.eigenvectors.transpose() * y.data;
      return y;
    }
    case SignalModel::discrete_alphabet: {
      auto g = gen_discrete_alphabet(decomp, spec.bandwidth, spec.alphabet_size,
                                     spec.n_signals, spec.seed);
      if (coefficients) *coefficients = g.coefficients;
      return g.signals;
    }
  }
  throw std::invalid_argument("gen_signals: unknown model");
}

}  // namespace gtopo
