#pragma once

// Monte-Carlo experiment harness: seeded trials over (graph, signals),
// transform learning or a-priori known bases, recovery over hyperparameter
// grids, metric aggregation, CSV and plot-data emission. Outputs are a pure
// function of (config, seed root) at any parallelism degree; per-trial seeds
// come from the order-independent split rule in rng.hpp.

#include <gtopo/graph_core.hpp>
#include <gtopo/io.hpp>
#include <gtopo/laplacian_solver.hpp>
#include <gtopo/metrics.hpp>
#include <gtopo/synthgen.hpp>
#include <gtopo/transform_learn.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace gtopo {

enum class ExperimentMode { table, mu_sweep, k_sweep };

inline const char* to_string(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::table: return "table";
    case ExperimentMode::mu_sweep: return "mu_sweep";
    case ExperimentMode::k_sweep: return "k_sweep";
  }
  return "?";
}

struct MethodSpec {
  RecoveryVariant variant = RecoveryVariant::tv_gl;
  std::vector<double> mu_grid{0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> alpha_grid{0.1, 0.5, 1.0, 2.0, 5.0};
  std::vector<double> beta_grid{0.1, 0.5, 1.0, 2.0, 5.0};
};

struct ExperimentConfig {
  int schema_version = 1;
  ExperimentMode mode = ExperimentMode::table;
  GraphModelSpec graph;
  SignalModelSpec signal;
  int bandwidth = 3;                  // learning / recovery K
  std::vector<int> k_sweep{2, 3, 4, 5, 6, 7, 8};
  std::vector<MethodSpec> methods;
  int trials = 20;
  std::uint64_t seed_root = 1;
  int jobs = 0;                       // 0 = hardware concurrency
  bool keep_artifacts = false;
  bool known_u = false;               // recover from the true eigenvectors
  bool compare_known_u = false;       // mu_sweep: run both pipelines
  bool timing = false;                // fill runtime_ms (breaks byte-identity)
  std::string out_dir = "experiment_out";
  TransformLearnConfig learn;
  SolverConfig solver;
};

// One per-trial result row; the CSV column order is fixed:
// seed,method,graph_model,signal_model,N,M,K,mu,rho,e0,ef,precision,recall,
// f_measure,threshold_used,runtime_ms,status,basis,alpha,beta
struct TrialRow {
  std::uint64_t seed = 0;
  std::string method;
  std::string graph_model;
  std::string signal_model;
  int n_nodes = 0;
  int n_signals = 0;
  int bandwidth = 0;
  std::optional<double> mu;
  std::optional<MetricsReport> metrics;
  std::optional<double> runtime_ms;
  std::string status = "ok";
  std::string basis;  // "known" or "estimated"
  std::optional<double> alpha, beta;
  int trial_index = 0;
};

inline std::string csv_header() {
  return "seed,method,graph_model,signal_model,N,M,K,mu,rho,e0,ef,precision,"
         "recall,f_measure,threshold_used,runtime_ms,status,basis,alpha,beta";
}

inline std::string to_csv(const TrialRow& r) {
  std::ostringstream os;
  auto opt = [&](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  os << r.seed << ',' << r.method << ',' << r.graph_model << ','
     << r.signal_model << ',' << r.n_nodes << ',' << r.n_signals << ','
     << r.bandwidth << ',' << opt(r.mu) << ',';
  if (r.metrics) {
    os << format_double(r.metrics->rho) << ',' << format_double(r.metrics->e0)
       << ',' << format_double(r.metrics->ef) << ','
       << format_double(r.metrics->precision) << ','
       << format_double(r.metrics->recall) << ','
       << format_double(r.metrics->f_measure) << ','
       << format_double(r.metrics->threshold_used) << ',';
  } else {
    os << ",,,,,,,";
  }
  os << opt(r.runtime_ms) << ',' << r.status << ',' << r.basis << ','
     << opt(r.alpha) << ',' << opt(r.beta);
  return os.str();
}

// ---------------------------------------------------------------------------
// Config parsing (flat key = value with [sections]; see README for schema)
// ---------------------------------------------------------------------------

namespace detail {

inline double to_double(const std::string& s, const std::string& key) {
  try {
    return std::stod(s);
  } catch (...) {
    throw std::invalid_argument("config: bad number for " + key + ": " + s);
  }
}

inline int to_int(const std::string& s, const std::string& key) {
  try {
    return std::stoi(s);
  } catch (...) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + s);
  }
}

inline bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + s);
}

inline std::vector<double> to_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(item, key));
  if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const KeyValues& kv) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_double_list;
  using detail::to_int;
  ExperimentConfig cfg;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  if (auto v = get("schema_version")) {
    cfg.schema_version = to_int(*v, "schema_version");
    if (cfg.schema_version != 1)
      throw std::invalid_argument("config: unsupported schema_version");
  }
  if (auto v = get("experiment.mode")) {
    if (*v == "table") cfg.mode = ExperimentMode::table;
    else if (*v == "mu_sweep") cfg.mode = ExperimentMode::mu_sweep;
    else if (*v == "k_sweep") cfg.mode = ExperimentMode::k_sweep;
    else throw std::invalid_argument("config: unknown mode " + *v);
  }
  if (auto v = get("experiment.trials")) cfg.trials = to_int(*v, "trials");
  if (cfg.trials < 1) throw std::invalid_argument("config: trials >= 1");
  if (auto v = get("experiment.seed")) cfg.seed_root = std::stoull(*v);
  if (auto v = get("experiment.jobs")) cfg.jobs = to_int(*v, "jobs");
  if (auto v = get("experiment.keep_artifacts"))
    cfg.keep_artifacts = to_bool(*v, "keep_artifacts");
  if (auto v = get("experiment.known_u")) cfg.known_u = to_bool(*v, "known_u");
  if (auto v = get("experiment.compare_known_u"))
    cfg.compare_known_u = to_bool(*v, "compare_known_u");
  if (auto v = get("experiment.timing")) cfg.timing = to_bool(*v, "timing");
  if (auto v = get("experiment.out_dir")) cfg.out_dir = *v;
  if (auto v = get("experiment.k_sweep")) {
    cfg.k_sweep.clear();
    for (const auto& item : split_list(*v))
      cfg.k_sweep.push_back(to_int(item, "k_sweep"));
  }

  if (auto v = get("graph.model")) cfg.graph.model = graph_model_from_string(*v);
  if (auto v = get("graph.clusters")) cfg.graph.n_clusters = to_int(*v, "clusters");
  if (auto v = get("graph.cluster_size"))
    cfg.graph.nodes_per_cluster = to_int(*v, "cluster_size");
  if (auto v = get("graph.p_intra")) cfg.graph.p_intra = to_double(*v, "p_intra");
  if (auto v = get("graph.p_inter")) cfg.graph.p_inter = to_double(*v, "p_inter");
  if (auto v = get("graph.n")) cfg.graph.n = to_int(*v, "n");
  if (auto v = get("graph.p")) cfg.graph.p = to_double(*v, "p");
  if (auto v = get("graph.m0")) cfg.graph.m0 = to_int(*v, "m0");
  if (auto v = get("graph.m")) cfg.graph.m = to_int(*v, "m");
  if (auto v = get("graph.weighted")) cfg.graph.weighted = to_bool(*v, "weighted");

  if (auto v = get("signal.model"))
    cfg.signal.model = signal_model_from_string(*v);
  if (auto v = get("signal.K")) cfg.signal.bandwidth = to_int(*v, "signal.K");
  if (auto v = get("signal.beta")) cfg.signal.beta = to_double(*v, "signal.beta");
  if (auto v = get("signal.alphabet_size"))
    cfg.signal.alphabet_size = to_int(*v, "alphabet_size");
  if (auto v = get("signal.M")) cfg.signal.n_signals = to_int(*v, "M");
  if (auto v = get("signal.mean")) cfg.signal.coeff_mean = to_double(*v, "mean");
  if (auto v = get("signal.variance"))
    cfg.signal.coeff_var = to_double(*v, "variance");
  if (auto v = get("signal.sigma_is_stddev"))
    cfg.signal.sigma_is_stddev = to_bool(*v, "sigma_is_stddev");
  if (auto v = get("signal.random_tail_sign"))
    cfg.signal.random_tail_sign = to_bool(*v, "random_tail_sign");

  if (auto v = get("learn.K")) cfg.bandwidth = to_int(*v, "learn.K");
  if (auto v = get("learn.max_iterations"))
    cfg.learn.max_iterations = to_int(*v, "learn.max_iterations");
  if (auto v = get("learn.rel_tol")) cfg.learn.rel_tol = to_double(*v, "rel_tol");

  if (auto v = get("solver.max_iterations"))
    cfg.solver.max_iterations = to_int(*v, "solver.max_iterations");
  if (auto v = get("solver.primal_tol"))
    cfg.solver.primal_tol = to_double(*v, "primal_tol");
  if (auto v = get("solver.dual_tol"))
    cfg.solver.dual_tol = to_double(*v, "dual_tol");

  std::vector<std::string> names{"tv_gl", "esa_gl", "dong", "kalofolias"};
  if (auto v = get("methods.list")) names = split_list(*v);
  if (names.empty()) throw std::invalid_argument("config: empty method list");
  std::vector<double> mu_grid, alpha_grid, beta_grid;
  if (auto v = get("methods.mu_grid")) mu_grid = to_double_list(*v, "mu_grid");
  if (auto v = get("methods.alpha_grid"))
    alpha_grid = to_double_list(*v, "alpha_grid");
  if (auto v = get("methods.beta_grid"))
    beta_grid = to_double_list(*v, "beta_grid");
  for (const auto& name : names) {
    MethodSpec m;
    m.variant = recovery_variant_from_string(name);
    if (!mu_grid.empty()) m.mu_grid = mu_grid;
    if (!alpha_grid.empty()) m.alpha_grid = alpha_grid;
    if (!beta_grid.empty()) m.beta_grid = beta_grid;
    cfg.methods.push_back(std::move(m));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

namespace detail {

struct TrialData {
  Graph graph;
  LaplacianMatrix laplacian;
  SpectralDecomposition decomp;
  SignalMatrix signals;
  std::uint64_t seed = 0;
};

inline TrialData make_trial_data(const ExperimentConfig& cfg, int trial) {
  TrialData d;
  d.seed = split_seed(cfg.seed_root, static_cast<std::uint64_t>(trial));
  GraphModelSpec gspec = cfg.graph;
  gspec.seed = split_seed(d.seed, 0);
  d.graph = gen_graph(gspec);
  d.laplacian = laplacian_from_adjacency(d.graph);
  d.decomp = spectral_decomposition(d.laplacian);
  SignalModelSpec sspec = cfg.signal;
  sspec.seed = split_seed(d.seed, 1);
  d.signals = gen_signals(sspec, d.decomp);
  return d;
}

struct BasisData {
  Matrix u_k;   // N x K
  Matrix s_k;   // K x M
  std::string label;
  TransformEstimate estimate;  // estimated pipeline only
  bool has_estimate = false;
};

inline BasisData known_basis(const TrialData& d, int k) {
  BasisData b;
  b.u_k = d.decomp.eigenvectors.leftCols(k);
  auto [s, support] =
      block_sparse_projection(d.decomp.eigenvectors.transpose() * d.signals.data, k);
  Matrix sk(k, d.signals.n_signals());
  for (int r = 0; r < k; ++r) sk.row(r) = s.row(support.indices[r]);
  b.s_k = std::move(sk);
  b.label = "known";
  return b;
}

inline BasisData estimated_basis(const TrialData& d, const ExperimentConfig& cfg,
                                 int k) {
  TransformLearnConfig lc = cfg.learn;
  lc.bandwidth = k;
  BasisData b;
  b.estimate = learn_transform(d.signals, lc);
  b.has_estimate = true;
  b.u_k = support_basis(b.estimate);
  b.s_k = support_coefficients(b.estimate);
  b.label = "estimated";
  return b;
}

struct SolveSpec {
  RecoveryVariant variant;
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

inline TrialRow run_solve(const ExperimentConfig& cfg, const TrialData& d,
                          const BasisData& basis, const SolveSpec& sp, int k,
                          int trial, const SolverState* warm,
                          SolverState* state_out, Matrix* l_hat_out) {
  TrialRow row;
  row.seed = d.seed;
  row.method = to_string(sp.variant);
  row.graph_model = to_string(cfg.graph.model);
  row.signal_model = to_string(cfg.signal.model);
  row.n_nodes = d.graph.n_nodes();
  row.n_signals = d.signals.n_signals();
  row.bandwidth = k;
  row.basis = basis.label;
  row.trial_index = trial;
  if (sp.variant == RecoveryVariant::kalofolias) {
    row.alpha = sp.alpha;
    row.beta = sp.beta;
  } else {
    row.mu = sp.mu;
  }

  RecoveryProblem prob;
  prob.variant = sp.variant;
  prob.mu = sp.mu;
  prob.alpha = sp.alpha;
  prob.beta = sp.beta;
  prob.trace_target = static_cast<double>(d.graph.n_nodes());
  switch (sp.variant) {
    case RecoveryVariant::tv_gl:
      prob.u_k = basis.u_k;
      prob.y = d.signals;
      break;
    case RecoveryVariant::esa_gl:
      prob.u_k = basis.u_k;
      prob.s_hat_k = basis.s_k;
      break;
    case RecoveryVariant::dong:
    case RecoveryVariant::kalofolias:
      prob.y = d.signals;
      break;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto rec = solve(prob, cfg.solver, warm);
  const auto t1 = std::chrono::steady_clock::now();
  if (cfg.timing)
    row.runtime_ms =
        std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() /
        1000.0;
  row.status = to_string(rec.status);
  if (state_out) *state_out = rec.state;
  if (l_hat_out) *l_hat_out = rec.laplacian.matrix;
  if (rec.status != SolveStatus::infeasible) {
    row.metrics = evaluate_recovery(d.graph, d.laplacian.matrix,
                                    rec.laplacian.matrix,
                                    rec.adjacency.adjacency);
  }
  return row;
}

inline std::vector<SolveSpec> grid_of(const MethodSpec& m) {
  std::vector<SolveSpec> out;
  if (m.variant == RecoveryVariant::kalofolias) {
    for (double a : m.alpha_grid)
      for (double b : m.beta_grid)
        out.push_back(SolveSpec{m.variant, 0.0, a, b});
  } else {
    // descending mu: the strongly regularized solves come first and warm
    // start the nearly-linear small-mu ones
    std::vector<double> grid = m.mu_grid;
    std::sort(grid.begin(), grid.end(), std::greater<double>());
    for (double mu : grid) out.push_back(SolveSpec{m.variant, mu, 0, 0});
  }
  return out;
}

inline void write_trial_artifacts(const ExperimentConfig& cfg, int trial,
                                  const TrialData& d,
                                  const std::vector<BasisData>& bases) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(cfg.out_dir) / "trials" /
                 ("trial_" + std::to_string(trial));
  fs::create_directories(dir);
  write_edge_list((dir / "graph.edges").string(), d.graph);
  write_matrix((dir / "laplacian.txt").string(), d.laplacian.matrix);
  write_matrix((dir / "eigvecs.txt").string(), d.decomp.eigenvectors);
  write_matrix((dir / "eigvals.txt").string(), Matrix(d.decomp.eigenvalues));
  write_matrix((dir / "signals.txt").string(), d.signals.data);
  for (const auto& b : bases) {
    write_matrix((dir / ("u_k_" + b.label + ".txt")).string(), b.u_k);
    write_matrix((dir / ("s_k_" + b.label + ".txt")).string(), b.s_k);
  }
}

inline void write_solve_artifact(const ExperimentConfig& cfg, int trial,
                                 const TrialRow& row, const Matrix& l_hat) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(cfg.out_dir) / "trials" /
                 ("trial_" + std::to_string(trial));
  fs::create_directories(dir);
  std::ostringstream name;
  name << "l_hat_" << row.method << "_" << row.basis;
  if (row.mu) name << "_mu" << format_double(*row.mu);
  if (row.alpha) name << "_a" << format_double(*row.alpha);
  if (row.beta) name << "_b" << format_double(*row.beta);
  if (row.bandwidth) name << "_K" << row.bandwidth;
  name << ".txt";
  write_matrix((dir / name.str()).string(), l_hat);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct Aggregate {
  std::string method;
  std::string basis;
  std::optional<double> mu, alpha, beta;
  int bandwidth = 0;
  int count = 0;
  double rho_mean = 0, rho_stderr = 0;
  double e0_mean = 0, e0_stderr = 0;
  double ef_mean = 0, ef_stderr = 0;
  double precision_mean = 0, recall_mean = 0, f_mean = 0, f_stderr = 0;
};

namespace detail {

inline void mean_stderr(const std::vector<double>& v, double* mean, double* se) {
  *mean = 0;
  *se = 0;
  if (v.empty()) return;
  for (double x : v) *mean += x;
  *mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0;
  for (double x : v) ss += (x - *mean) * (x - *mean);
  *se = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) /
                  static_cast<double>(v.size()));
}

}  // namespace detail

// Groups rows by (method, basis, hyperparameters, K) and averages metrics
// over trials; rows without metrics (failed trials) are skipped but counted.
inline std::vector<Aggregate> aggregate_rows(const std::vector<TrialRow>& rows) {
  std::vector<std::string> keys;
  std::vector<Aggregate> aggs;
  std::vector<std::vector<double>> rho, e0, ef, prec, rec, fm;
  for (const auto& r : rows) {
    std::ostringstream key;
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string("-");
    };
    key << r.method << '|' << r.basis << '|' << opt(r.mu) << '|' << opt(r.alpha)
        << '|' << opt(r.beta) << '|' << r.bandwidth;
    size_t idx = 0;
    for (; idx < keys.size(); ++idx)
      if (keys[idx] == key.str()) break;
    if (idx == keys.size()) {
      keys.push_back(key.str());
      Aggregate a;
      a.method = r.method;
      a.basis = r.basis;
      a.mu = r.mu;
      a.alpha = r.alpha;
      a.beta = r.beta;
      a.bandwidth = r.bandwidth;
      aggs.push_back(a);
      rho.emplace_back();
      e0.emplace_back();
      ef.emplace_back();
      prec.emplace_back();
      rec.emplace_back();
      fm.emplace_back();
    }
    aggs[idx].count += 1;
    if (r.metrics) {
      rho[idx].push_back(r.metrics->rho);
      e0[idx].push_back(r.metrics->e0);
      ef[idx].push_back(r.metrics->ef);
      prec[idx].push_back(r.metrics->precision);
      rec[idx].push_back(r.metrics->recall);
      fm[idx].push_back(r.metrics->f_measure);
    }
  }
  for (size_t i = 0; i < aggs.size(); ++i) {
    double tmp;
    detail::mean_stderr(rho[i], &aggs[i].rho_mean, &aggs[i].rho_stderr);
    detail::mean_stderr(e0[i], &aggs[i].e0_mean, &aggs[i].e0_stderr);
    detail::mean_stderr(ef[i], &aggs[i].ef_mean, &aggs[i].ef_stderr);
    detail::mean_stderr(prec[i], &aggs[i].precision_mean, &tmp);
    detail::mean_stderr(rec[i], &aggs[i].recall_mean, &tmp);
    detail::mean_stderr(fm[i], &aggs[i].f_mean, &aggs[i].f_stderr);
  }
  return aggs;
}

struct ExperimentResult {
  std::vector<TrialRow> rows;           // trial order, deterministic
  std::vector<Aggregate> aggregates;    // all grid points
  std::vector<Aggregate> best;          // per-method selection (table/k_sweep)
};

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("experiment: trials >= 1");
  if (cfg.methods.empty())
    throw std::invalid_argument("experiment: no methods configured");

  const std::vector<int> k_values = cfg.mode == ExperimentMode::k_sweep
                                        ? cfg.k_sweep
                                        : std::vector<int>{cfg.bandwidth};

  // per-trial row buckets keep the output order independent of scheduling
  std::vector<std::vector<TrialRow>> buckets(cfg.trials);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int trial = next.fetch_add(1);
      if (trial >= cfg.trials) return;
      auto& bucket = buckets[trial];
      try {
        auto data = detail::make_trial_data(cfg, trial);
        std::vector<detail::BasisData> bases;
        for (int k : k_values) {
          bases.clear();
          if (cfg.mode == ExperimentMode::mu_sweep && cfg.compare_known_u) {
            bases.push_back(detail::known_basis(data, k));
            bases.push_back(detail::estimated_basis(data, cfg, k));
          } else if (cfg.known_u) {
            bases.push_back(detail::known_basis(data, k));
          } else {
            bases.push_back(detail::estimated_basis(data, cfg, k));
          }
          if (cfg.keep_artifacts)
            detail::write_trial_artifacts(cfg, trial, data, bases);
          for (const auto& basis : bases) {
            for (const auto& method : cfg.methods) {
              SolverState warm;
              bool have_warm = false;
              for (const auto& sp : detail::grid_of(method)) {
                Matrix l_hat;
                TrialRow row = detail::run_solve(
                    cfg, data, basis, sp, k, trial,
                    have_warm ? &warm : nullptr, &warm, &l_hat);
                have_warm = true;
                if (cfg.keep_artifacts)
                  detail::write_solve_artifact(cfg, trial, row, l_hat);
                bucket.push_back(std::move(row));
              }
            }
          }
        }
      } catch (const std::exception& e) {
        TrialRow row;
        row.seed = split_seed(cfg.seed_root, static_cast<std::uint64_t>(trial));
        row.graph_model = to_string(cfg.graph.model);
        row.signal_model = to_string(cfg.signal.model);
        row.status = std::string("error: ") + e.what();
        row.trial_index = trial;
        bucket.push_back(std::move(row));
      }
    }
  };

  int jobs = cfg.jobs > 0 ? cfg.jobs
                          : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, cfg.trials));
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  ExperimentResult result;
  for (auto& bucket : buckets)
    for (auto& row : bucket) result.rows.push_back(std::move(row));
  result.aggregates = aggregate_rows(result.rows);

  // per-method selection: table picks max mean rho (mirroring "optimal mu"),
  // k_sweep picks min mean e0 per (method, K)
  if (cfg.mode == ExperimentMode::table) {
    for (const auto& method : cfg.methods) {
      const std::string name = to_string(method.variant);
      const Aggregate* best = nullptr;
      for (const auto& a : result.aggregates)
        if (a.method == name && (!best || a.rho_mean > best->rho_mean))
          best = &a;
      if (best) result.best.push_back(*best);
    }
  } else if (cfg.mode == ExperimentMode::k_sweep) {
    for (const auto& method : cfg.methods) {
      const std::string name = to_string(method.variant);
      for (int k : k_values) {
        const Aggregate* best = nullptr;
        for (const auto& a : result.aggregates)
          if (a.method == name && a.bandwidth == k &&
              (!best || a.e0_mean < best->e0_mean))
            best = &a;
        if (best) result.best.push_back(*best);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline void write_experiment_outputs(const ExperimentConfig& cfg,
                                     const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const bool with_se = cfg.trials >= 2;
  auto se_str = [&](double se) { return with_se ? format_double(se) : std::string(); };

  {
    std::ofstream os(fs::path(cfg.out_dir) / "trials.csv");
    if (!os) throw IoError("cannot write trials.csv");
    os << csv_header() << "\n";
    for (const auto& r : result.rows) os << to_csv(r) << "\n";
  }
  {
    std::ofstream os(fs::path(cfg.out_dir) / "aggregates.csv");
    if (!os) throw IoError("cannot write aggregates.csv");
    os << "method,basis,mu,alpha,beta,K,count,rho_mean,rho_stderr,e0_mean,"
          "e0_stderr,ef_mean,ef_stderr,precision_mean,recall_mean,f_mean,"
          "f_stderr\n";
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    for (const auto& a : result.aggregates)
      os << a.method << ',' << a.basis << ',' << opt(a.mu) << ',' << opt(a.alpha)
         << ',' << opt(a.beta) << ',' << a.bandwidth << ',' << a.count << ','
         << format_double(a.rho_mean) << ',' << se_str(a.rho_stderr) << ','
         << format_double(a.e0_mean) << ',' << se_str(a.e0_stderr) << ','
         << format_double(a.ef_mean) << ',' << se_str(a.ef_stderr) << ','
         << format_double(a.precision_mean) << ',' << format_double(a.recall_mean)
         << ',' << format_double(a.f_mean) << ',' << se_str(a.f_stderr) << "\n";
  }
  if (!result.best.empty()) {
    std::ofstream os(fs::path(cfg.out_dir) / "selected.csv");
    if (!os) throw IoError("cannot write selected.csv");
    os << "method,basis,mu,alpha,beta,K,rho_mean,rho_stderr,e0_mean,e0_stderr,"
          "ef_mean,ef_stderr,precision_mean,recall_mean,f_mean,f_stderr\n";
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    for (const auto& a : result.best)
      os << a.method << ',' << a.basis << ',' << opt(a.mu) << ',' << opt(a.alpha)
         << ',' << opt(a.beta) << ',' << a.bandwidth << ','
         << format_double(a.rho_mean) << ',' << se_str(a.rho_stderr) << ','
         << format_double(a.e0_mean) << ',' << se_str(a.e0_stderr) << ','
         << format_double(a.ef_mean) << ',' << se_str(a.ef_stderr) << ','
         << format_double(a.precision_mean) << ',' << format_double(a.recall_mean)
         << ',' << format_double(a.f_mean) << ',' << se_str(a.f_stderr) << "\n";
  }

  // plot-data files: "x mean stderr" per curve
  if (cfg.mode == ExperimentMode::mu_sweep) {
    for (const auto& method : cfg.methods) {
      if (method.variant == RecoveryVariant::kalofolias) continue;
      const std::string name = to_string(method.variant);
      std::vector<std::string> bases;
      for (const auto& a : result.aggregates)
        if (a.method == name &&
            std::find(bases.begin(), bases.end(), a.basis) == bases.end())
          bases.push_back(a.basis);
      for (const auto& basis : bases) {
        for (const char* metric : {"rho", "e0"}) {
          std::ofstream os(fs::path(cfg.out_dir) /
                           ("curve_" + std::string(metric) + "_" + name + "_" +
                            basis + ".dat"));
          for (double mu : method.mu_grid)
            for (const auto& a : result.aggregates)
              if (a.method == name && a.basis == basis && a.mu &&
                  *a.mu == mu) {
                const bool is_rho = std::string(metric) == "rho";
                os << format_double(mu) << ' '
                   << format_double(is_rho ? a.rho_mean : a.e0_mean) << ' '
                   << se_str(is_rho ? a.rho_stderr : a.e0_stderr) << "\n";
              }
        }
      }
    }
  } else if (cfg.mode == ExperimentMode::k_sweep) {
    for (const auto& method : cfg.methods) {
      const std::string name = to_string(method.variant);
      for (const char* metric : {"e0", "ef"}) {
        std::ofstream os(fs::path(cfg.out_dir) /
                         ("curve_" + std::string(metric) + "_vs_k_" + name +
                          ".dat"));
        for (int k : cfg.k_sweep)
          for (const auto& a : result.best)
            if (a.method == name && a.bandwidth == k) {
              const bool is_e0 = std::string(metric) == "e0";
              os << k << ' ' << format_double(is_e0 ? a.e0_mean : a.ef_mean)
                 << ' ' << se_str(is_e0 ? a.e0_stderr : a.ef_stderr) << "\n";
            }
      }
    }
  }
}

}  // namespace gtopo
