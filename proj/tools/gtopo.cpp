// gtopo: graph topology inference from graph signals.
//
// Subcommands expose every pipeline stage: synthetic data generation,
// sparsifying-transform learning, convex Laplacian recovery, identifiability
// analysis, metric evaluation, and the Monte-Carlo experiment harness.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numerical
// failure.

#include <gtopo/experiment.hpp>
#include <gtopo/graph_core.hpp>
#include <gtopo/identifiability.hpp>
#include <gtopo/io.hpp>
#include <gtopo/laplacian_solver.hpp>
#include <gtopo/metrics.hpp>
#include <gtopo/synthgen.hpp>
#include <gtopo/transform_learn.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace gtopo;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_meta(const std::string& path, const KeyValues& kv) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto& [key, value] : kv) os << key << " = " << value << "\n";
}

// --- gen ---

struct GenArgs {
  std::string model = "clustered";
  int clusters = 3;
  int cluster_size = 10;
  double p_intra = 0.7;
  double p_inter = 0.01;
  int n = 30;
  double p = 0.3;
  int m0 = 4;
  int m_attach = 3;
  bool weighted = false;
  std::string signals = "bandlimited";
  int bandwidth = 3;
  int n_signals = 15;
  double mean = 1.0;
  double variance = 0.5;
  bool sigma_is_stddev = false;
  double beta = 2.0;
  int alphabet = 2;
  std::uint64_t seed = 1;
  std::string out = "gen_out";
};

int cmd_gen(const GenArgs& a) {
  GraphModelSpec gspec;
  gspec.model = graph_model_from_string(a.model);
  gspec.n_clusters = a.clusters;
  gspec.nodes_per_cluster = a.cluster_size;
  gspec.p_intra = a.p_intra;
  gspec.p_inter = a.p_inter;
  gspec.n = a.n;
  gspec.p = a.p;
  gspec.m0 = a.m0;
  gspec.m = a.m_attach;
  gspec.weighted = a.weighted;
  gspec.seed = split_seed(a.seed, 0);

  SignalModelSpec sspec;
  sspec.model = signal_model_from_string(a.signals);
  sspec.bandwidth = a.bandwidth;
  sspec.n_signals = a.n_signals;
  sspec.coeff_mean = a.mean;
  sspec.coeff_var = a.variance;
  sspec.sigma_is_stddev = a.sigma_is_stddev;
  sspec.beta = a.beta;
  sspec.alphabet_size = a.alphabet;
  sspec.seed = split_seed(a.seed, 1);

  auto graph = gen_graph(gspec);
  auto lap = laplacian_from_adjacency(graph);
  auto dec = spectral_decomposition(lap);
  Matrix coeffs;
  auto signals = gen_signals(sspec, dec, &coeffs);

  fs::create_directories(a.out);
  write_edge_list((fs::path(a.out) / "graph.edges").string(), graph);
  write_matrix((fs::path(a.out) / "laplacian.txt").string(), lap.matrix);
  write_matrix((fs::path(a.out) / "eigvecs.txt").string(), dec.eigenvectors);
  write_matrix((fs::path(a.out) / "eigvals.txt").string(),
               Matrix(dec.eigenvalues));
  write_matrix((fs::path(a.out) / "signals.txt").string(), signals.data);
  write_matrix((fs::path(a.out) / "coeffs.txt").string(), coeffs);
  std::cout << "wrote " << a.out << ": graph.edges laplacian.txt eigvecs.txt "
            << "eigvals.txt signals.txt coeffs.txt\n";
  return 0;
}

// --- learn ---

struct LearnArgs {
  std::string y_file;
  int bandwidth = 3;
  int max_iterations = 500;
  double rel_tol = 1e-6;
  std::string init = "householder";
  int restarts = 1;
  std::uint64_t seed = 1;
  std::string out = "learn_out";
};

int cmd_learn(const LearnArgs& a) {
  SignalMatrix y = make_signals(read_matrix(a.y_file));
  TransformLearnConfig cfg;
  cfg.bandwidth = a.bandwidth;
  cfg.max_iterations = a.max_iterations;
  cfg.rel_tol = a.rel_tol;
  if (a.init == "householder") {
    cfg.init = TransformInit::householder_identity;
  } else if (a.init == "random") {
    cfg.init = TransformInit::random_orthonormal;
  } else {
    throw UsageError("unknown --init (use householder or random)");
  }

  const int restarts = cfg.init == TransformInit::random_orthonormal
                           ? std::max(1, a.restarts)
                           : 1;
  TransformEstimate best;
  for (int r = 0; r < restarts; ++r) {
    cfg.init_seed = split_seed(a.seed, static_cast<std::uint64_t>(r));
    auto est = learn_transform(y, cfg);
    if (r == 0 || est.objective() < best.objective()) best = std::move(est);
  }

  fs::create_directories(a.out);
  write_matrix((fs::path(a.out) / "u_hat.txt").string(), best.u_hat);
  write_matrix((fs::path(a.out) / "s_hat.txt").string(), best.s_hat);
  KeyValues meta;
  std::ostringstream support, trace;
  for (size_t i = 0; i < best.support.indices.size(); ++i)
    support << (i ? " " : "") << best.support.indices[i];
  for (size_t i = 0; i < best.objective_trace.size(); ++i)
    trace << (i ? " " : "") << format_double(best.objective_trace[i]);
  meta["support"] = support.str();
  meta["objective"] = format_double(best.objective());
  meta["objective_trace"] = trace.str();
  meta["iterations"] = std::to_string(best.iterations);
  meta["converged"] = best.converged ? "true" : "false";
  meta["K"] = std::to_string(a.bandwidth);
  meta["restarts"] = std::to_string(restarts);
  write_meta((fs::path(a.out) / "transform.meta").string(), meta);
  std::cout << "objective " << format_double(best.objective()) << " after "
            << best.iterations << " iterations (converged: "
            << (best.converged ? "true" : "false") << ")\n";
  return 0;
}

// --- recover ---

struct RecoverArgs {
  std::string method = "tv_gl";
  std::string u_file;
  std::string y_file;
  std::string s_file;
  std::string transform_dir;
  double mu = 1.0;
  double p = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  bool known_eigenvectors = false;
  bool esa_square = false;
  int max_iterations = 30000;
  double tol = 1e-6;
  std::string out = "recover_out";
};

int cmd_recover(const RecoverArgs& a) {
  RecoveryProblem prob;
  prob.variant = recovery_variant_from_string(a.method);
  prob.mu = a.mu;
  prob.alpha = a.alpha;
  prob.beta = a.beta;
  prob.trace_target = a.p;
  prob.esa_square_penalty = a.esa_square;
  if (a.known_eigenvectors) prob.basis_form = BasisForm::known_eigenvectors;

  const bool needs_u = prob.variant == RecoveryVariant::tv_gl ||
                       prob.variant == RecoveryVariant::esa_gl;
  std::string u_file = a.u_file;
  std::string s_file = a.s_file;
  if (!a.transform_dir.empty()) {
    if (u_file.empty())
      u_file = (fs::path(a.transform_dir) / "u_hat.txt").string();
    if (s_file.empty())
      s_file = (fs::path(a.transform_dir) / "s_hat.txt").string();
  }
  if (needs_u) {
    if (u_file.empty())
      throw UsageError(a.method + " requires --u (or --transform-dir)");
    Matrix u = read_matrix(u_file);
    if (!a.transform_dir.empty() && u.cols() == u.rows()) {
      // a full learned transform: restrict to the support columns
      auto meta = read_key_values_file(
          (fs::path(a.transform_dir) / "transform.meta").string());
      std::vector<int> support;
      std::istringstream is(meta.at("support"));
      int idx;
      while (is >> idx) support.push_back(idx);
      Matrix uk(u.rows(), support.size());
      for (size_t c = 0; c < support.size(); ++c) uk.col(c) = u.col(support[c]);
      prob.u_k = std::move(uk);
    } else {
      prob.u_k = std::move(u);
    }
  } else if (!u_file.empty()) {
    std::cerr << "warning: --u is ignored by the " << a.method << " baseline\n";
  }
  if (prob.variant == RecoveryVariant::esa_gl) {
    if (s_file.empty())
      throw UsageError("esa_gl requires --s (or --transform-dir)");
    Matrix s = read_matrix(s_file);
    if (s.rows() == prob.u_k.rows() && !a.transform_dir.empty()) {
      auto meta = read_key_values_file(
          (fs::path(a.transform_dir) / "transform.meta").string());
      std::vector<int> support;
      std::istringstream is(meta.at("support"));
      int idx;
      while (is >> idx) support.push_back(idx);
      Matrix sk(support.size(), s.cols());
      for (size_t r = 0; r < support.size(); ++r) sk.row(r) = s.row(support[r]);
      prob.s_hat_k = std::move(sk);
    } else {
      prob.s_hat_k = std::move(s);
    }
  } else {
    if (a.y_file.empty()) throw UsageError(a.method + " requires --y");
    prob.y = make_signals(read_matrix(a.y_file));
  }

  SolverConfig cfg;
  cfg.max_iterations = a.max_iterations;
  cfg.primal_tol = a.tol;
  cfg.dual_tol = a.tol;
  auto rec = solve(prob, cfg);

  fs::create_directories(a.out);
  write_matrix((fs::path(a.out) / "l_hat.txt").string(), rec.laplacian.matrix);
  write_matrix((fs::path(a.out) / "a_hat.txt").string(),
               rec.adjacency.adjacency);
  if (rec.c_k.size() > 0)
    write_matrix((fs::path(a.out) / "c_k.txt").string(), rec.c_k);
  KeyValues meta;
  meta["method"] = a.method;
  meta["status"] = to_string(rec.status);
  meta["objective"] = format_double(rec.objective_value);
  meta["iterations"] = std::to_string(rec.iterations);
  meta["residual_subspace"] = format_double(rec.residuals.subspace);
  meta["residual_trace"] = format_double(rec.residuals.trace);
  meta["residual_row_sum"] = format_double(rec.residuals.row_sum);
  meta["residual_sign"] = format_double(rec.residuals.sign);
  meta["residual_psd"] = format_double(rec.residuals.psd);
  write_meta((fs::path(a.out) / "recover.meta").string(), meta);
  std::cout << "status " << to_string(rec.status) << ", objective "
            << format_double(rec.objective_value) << ", max residual "
            << format_double(rec.residuals.max()) << "\n";
  return 0;
}

// --- identify ---

struct IdentifyArgs {
  std::string u_file;
  double p = 0.0;
  int components = 1;
  std::string graph_file;
  std::string out;
};

int cmd_identify(const IdentifyArgs& a) {
  Matrix u = read_matrix(a.u_file);
  const int n = static_cast<int>(u.rows());
  const double p = a.p > 0 ? a.p : static_cast<double>(n);
  int components = a.components;
  int adjacency_l0 = -1;
  if (!a.graph_file.empty()) {
    Graph g = read_edge_list(a.graph_file);
    components = component_count(g);
    adjacency_l0 = static_cast<int>((g.adjacency.array() > 0).count());
  }
  auto sys = assemble_system(u, p);
  auto v = rank_analysis(sys, 1e-10, components, adjacency_l0);

  KeyValues rec;
  rec["rows"] = std::to_string(sys.rows());
  rec["cols"] = std::to_string(sys.cols());
  rec["rank"] = std::to_string(v.rank);
  rec["regime"] = to_string(v.regime);
  rec["singleton"] = v.singleton ? "true" : "false";
  rec["rank_lower"] = std::to_string(v.rank_lower);
  rec["rank_upper"] = std::to_string(v.rank_upper);
  rec["sparsity_bound"] = std::to_string(v.sparsity_bound);
  if (v.bandwidth_checked)
    rec["bandwidth_bound_ok"] = v.bandwidth_bound_ok ? "true" : "false";
  for (const auto& [key, value] : rec)
    std::cout << key << " = " << value << "\n";
  if (!a.out.empty()) write_meta(a.out, rec);
  return 0;
}

// --- eval ---

struct EvalArgs {
  std::string true_graph;
  std::string est_l;
  std::string est_a;
  bool threshold_all_entries = false;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  Graph truth = read_edge_list(a.true_graph);
  Matrix l_true = laplacian_from_adjacency(truth).matrix;
  Matrix l_est, a_est;
  if (!a.est_l.empty()) {
    l_est = read_matrix(a.est_l);
    a_est = adjacency_from_laplacian(l_est).adjacency;
  } else if (!a.est_a.empty()) {
    a_est = read_matrix(a.est_a);
    l_est = laplacian_from_adjacency(make_graph(a_est, 1e-9)).matrix;
  } else {
    throw UsageError("eval requires --est-l or --est-a");
  }
  auto rep = evaluate_recovery(truth, l_true, l_est, a_est,
                               a.threshold_all_entries);
  std::ostringstream os;
  os << "rho,e0,ef,precision,recall,f_measure,threshold_used\n"
     << format_double(rep.rho) << ',' << format_double(rep.e0) << ','
     << format_double(rep.ef) << ',' << format_double(rep.precision) << ','
     << format_double(rep.recall) << ',' << format_double(rep.f_measure) << ','
     << format_double(rep.threshold_used) << "\n";
  std::cout << os.str();
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot open for writing: " + a.out);
    f << os.str();
  }
  return 0;
}

// --- experiment ---

struct ExperimentArgs {
  std::string config_file;
  std::string out;
  int jobs = -1;
  std::int64_t seed = -1;
  bool keep_artifacts = false;
  bool timing = false;
};

int cmd_experiment(const ExperimentArgs& a) {
  auto kv = read_key_values_file(a.config_file);
  auto cfg = parse_experiment_config(kv);
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.jobs >= 0) cfg.jobs = a.jobs;
  if (a.seed >= 0) cfg.seed_root = static_cast<std::uint64_t>(a.seed);
  if (a.keep_artifacts) cfg.keep_artifacts = true;
  if (a.timing) cfg.timing = true;
  auto result = run_experiment(cfg);
  write_experiment_outputs(cfg, result);
  int failures = 0;
  for (const auto& r : result.rows)
    if (r.status.rfind("error", 0) == 0) ++failures;
  std::cout << "wrote " << cfg.out_dir << " (" << result.rows.size()
            << " rows, " << failures << " failed)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph topology inference from graph signals"};
  app.require_subcommand(1);
  std::string format = "csv";
  app.add_option("--format", format, "output format (csv)")
      ->check(CLI::IsMember({"csv"}));

  GenArgs gen;
  auto* sgen = app.add_subcommand("gen", "generate a synthetic graph + signals");
  sgen->add_option("--model", gen.model, "clustered | er | ba");
  sgen->add_option("--clusters", gen.clusters, "clustered: cluster count");
  sgen->add_option("--size", gen.cluster_size, "clustered: nodes per cluster");
  sgen->add_option("--p-intra", gen.p_intra, "clustered: intra-cluster edge prob");
  sgen->add_option("--p-inter", gen.p_inter, "clustered: inter-cluster edge prob");
  sgen->add_option("--n", gen.n, "er/ba: node count");
  sgen->add_option("--p", gen.p, "er: edge probability");
  sgen->add_option("--m0", gen.m0, "ba: seed clique size");
  sgen->add_option("--m", gen.m_attach, "ba: edges per arriving node");
  sgen->add_flag("--weighted", gen.weighted, "Uniform(0.5,1.5) edge weights");
  sgen->add_option("--signals", gen.signals,
                   "bandlimited | compressible | inverse_laplacian | "
                   "discrete_alphabet");
  sgen->add_option("--K", gen.bandwidth, "signal bandwidth (or K_v)");
  sgen->add_option("--M", gen.n_signals, "signal count");
  sgen->add_option("--mean", gen.mean, "Gaussian coefficient mean");
  sgen->add_option("--variance", gen.variance, "Gaussian coefficient variance");
  sgen->add_flag("--sigma-stddev", gen.sigma_is_stddev,
                 "treat --variance as a standard deviation");
  sgen->add_option("--beta", gen.beta, "compressible decay exponent");
  sgen->add_option("--alphabet", gen.alphabet, "discrete alphabet size");
  sgen->add_option("--seed", gen.seed, "seed");
  sgen->add_option("--out", gen.out, "output directory");

  LearnArgs learn;
  auto* slearn = app.add_subcommand("learn", "learn the sparsifying transform");
  slearn->add_option("--y", learn.y_file, "signal matrix file")->required();
  slearn->add_option("--K", learn.bandwidth, "block-sparsity bandwidth");
  slearn->add_option("--max-iters", learn.max_iterations, "iteration cap");
  slearn->add_option("--rel-tol", learn.rel_tol, "relative objective tolerance");
  slearn->add_option("--init", learn.init, "householder | random");
  slearn->add_option("--restarts", learn.restarts, "random restarts");
  slearn->add_option("--seed", learn.seed, "seed");
  slearn->add_option("--out", learn.out, "output directory");

  RecoverArgs rec;
  auto* srec = app.add_subcommand("recover", "recover the Laplacian");
  srec->add_option("--method", rec.method, "tv_gl | esa_gl | dong | kalofolias");
  srec->add_option("--u", rec.u_file, "partial eigenbasis file (N x K)");
  srec->add_option("--y", rec.y_file, "signal matrix file");
  srec->add_option("--s", rec.s_file, "coefficient matrix file (K x M)");
  srec->add_option("--transform-dir", rec.transform_dir,
                   "learn output directory (reads u_hat/s_hat/support)");
  srec->add_option("--mu", rec.mu, "penalty coefficient");
  srec->add_option("--p", rec.p, "trace target (default N)");
  srec->add_option("--alpha", rec.alpha, "kalofolias log-degree weight");
  srec->add_option("--beta", rec.beta, "kalofolias Frobenius weight");
  srec->add_flag("--known-eigenvectors", rec.known_eigenvectors,
                 "treat columns as exact eigenvectors (eigenvalue unknowns)");
  srec->add_flag("--esa-square", rec.esa_square,
                 "square the ESA-GL Frobenius penalty");
  srec->add_option("--max-iters", rec.max_iterations, "solver iteration cap");
  srec->add_option("--tol", rec.tol, "solver tolerance");
  srec->add_option("--out", rec.out, "output directory");

  IdentifyArgs ident;
  auto* sid = app.add_subcommand("identify", "identifiability analysis");
  sid->add_option("--u", ident.u_file, "eigenvector matrix file")->required();
  sid->add_option("--p", ident.p, "trace target (default N)");
  sid->add_option("--components", ident.components, "connected component count");
  sid->add_option("--graph", ident.graph_file,
                  "edge list (derives components and sparsity)");
  sid->add_option("--out", ident.out, "verdict record file");

  EvalArgs eval;
  auto* seval = app.add_subcommand("eval", "metrics against a ground truth");
  seval->add_option("--true-graph", eval.true_graph, "edge list")->required();
  seval->add_option("--est-l", eval.est_l, "estimated Laplacian file");
  seval->add_option("--est-a", eval.est_a, "estimated adjacency file");
  seval->add_flag("--threshold-all-entries", eval.threshold_all_entries,
                  "average over all N^2 entries for the binarization threshold");
  seval->add_option("--out", eval.out, "also write the CSV here");

  ExperimentArgs exp;
  auto* sexp = app.add_subcommand("experiment", "Monte-Carlo harness");
  sexp->add_option("config", exp.config_file, "config file")->required();
  sexp->add_option("--out", exp.out, "output directory override");
  sexp->add_option("--jobs", exp.jobs, "worker thread count (0 = hardware)");
  sexp->add_option("--seed", exp.seed, "seed root override");
  sexp->add_flag("--keep-artifacts", exp.keep_artifacts,
                 "persist per-trial inputs and recovered matrices");
  sexp->add_flag("--timing", exp.timing,
                 "fill the runtime_ms column (output no longer byte-stable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sgen) return cmd_gen(gen);
    if (*slearn) return cmd_learn(learn);
    if (*srec) return cmd_recover(rec);
    if (*sid) return cmd_identify(ident);
    if (*seval) return cmd_eval(eval);
    if (*sexp) return cmd_experiment(exp);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
