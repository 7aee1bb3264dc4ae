#include "ofm_cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ofm/eig_oracle.hpp"
#include "ofm/errors.hpp"
#include "ofm/kernels.hpp"
#include "ofm/parallel.hpp"
#include "ofm/pipeline.hpp"

namespace ofm::cli {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string method;
  int k = 0;
  int iters = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool has_k = false;
  bool has_iters = false;
  bool has_seed = false;
};

enum class Command { kGen, kCluster, kStream, kBench, kVerify };

// Config file first, then flag overrides.
ExperimentConfig make_config(const Flags& f, Command cmd) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.method.empty()) {
    auto m = parse_method(f.method);
    if (!m) throw ConfigError("unknown method '" + f.method + "'");
    cfg.method = *m;
  }
  if (f.has_k) cfg.ofm.k = f.k;
  if (cmd == Command::kStream && !cfg.stream) cfg.stream = StreamParams{};
  if (f.has_iters) {
    if (cmd == Command::kStream) {
      cfg.stream->iters_per_stage = f.iters;
    } else {
      cfg.ofm.max_iters = f.iters;
    }
  }
  if (f.has_seed) {
    if (cmd == Command::kGen) {
      cfg.graph.sbm.seed = f.seed;
    } else {
      cfg.ofm.seed = f.seed;
      cfg.kmeans_seed = f.seed;
    }
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (cfg.out_dir.empty()) cfg.out_dir = (fs::path("runs") / config_hash(cfg)).string();
  return cfg;
}

void write_config(const ExperimentConfig& cfg) {
  std::ofstream out(fs::path(cfg.out_dir) / "config.json");
  if (!out) throw IoError("cannot write config.json in " + cfg.out_dir);
  out << config_to_json(cfg) << '\n';
}

void print_rows(std::ostream& out, std::span<const ClusteringRun> runs) {
  std::vector<ResultRow> rows;
  for (const auto& r : runs) rows.push_back(summarize(r));
  write_results_csv(out, rows);
}

int cmd_gen(const ExperimentConfig& cfg, std::ostream& out) {
  if (!cfg.graph.edge_file.empty()) throw ConfigError("gen needs graph.sbm, not an edge file");
  if (cfg.graph.sbm.n == 0) throw ConfigError("gen needs graph.sbm.n");
  auto [g, truth] = generate_sbm(cfg.graph.sbm);
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream f(dir / "graph.txt");
    if (!f) throw IoError("cannot write graph.txt");
    write_edge_list(f, g);
  }
  {
    std::ofstream f(dir / "truth.txt");
    if (!f) throw IoError("cannot write truth.txt");
    write_labels(f, make_labeling(truth.labels, static_cast<int>(truth.n_blocks)));
  }
  out << "nodes " << g.n_nodes << ", edges " << g.edges.size() << ", blocks " << truth.n_blocks << '\n';
  out << "wrote " << (dir / "graph.txt").string() << " and " << (dir / "truth.txt").string() << '\n';
  return kOk;
}

int cmd_cluster(const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<ClusteringRun> runs = {run_pipeline(cfg)};
  write_outputs(cfg.out_dir, runs);
  write_config(cfg);
  print_rows(out, runs);
  out << "wrote " << cfg.out_dir << '\n';
  return kOk;
}

int cmd_stream(const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<ClusteringRun> runs = run_streaming(cfg);
  write_outputs(cfg.out_dir, runs);
  write_config(cfg);
  print_rows(out, runs);
  out << "wrote " << cfg.out_dir << '\n';
  return kOk;
}

int cmd_bench(const ExperimentConfig& cfg, std::ostream& out) {
  validate_config(cfg, false);
  Problem problem = load_problem(cfg);
  SparseSym a = build_shifted_operator(problem.graph);
  const Index k = cfg.ofm.k;

  std::vector<CostRow> predicted;
  std::ostringstream ledger;
  ledger << "method,N,k,p,flops,alpha_terms,beta_words,scalar_words,load_imbalance\n";
  for (int side = 1; side <= 8 && side <= a.n; side *= 2) {
    const int p = side * side;
    predicted.push_back({cfg.method, a.n, k, p, predict_iteration_cost(cfg.method, a.nnz(), a.n, k, p)});
    IterationCost c = measure_iteration_cost(cfg.method, a, k, p, cfg.ofm.seed);
    ProcessGrid grid(a, p);
    ledger << method_name(cfg.method) << ',' << a.n << ',' << k << ',' << p << ',' << c.flops_per_process()
           << ',' << c.ledger.latency_events() << ',' << c.ledger.panel_words() << ','
           << c.ledger.allreduce_scalar.words << ',' << (a.nnz() > 0 ? load_imbalance(grid) : 1.0) << '\n';
  }
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream cost(dir / "cost.csv");
  std::ofstream led(dir / "ledger.csv");
  if (!cost || !led) throw IoError("cannot write cost.csv / ledger.csv in " + dir.string());
  write_cost_csv(cost, predicted);
  led << ledger.str();

  out << "# predicted per process\n";
  write_cost_csv(out, predicted);
  out << "# simulated ledger, one steady-state iteration\n" << ledger.str();
  out << "wrote " << cfg.out_dir << '\n';
  return kOk;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& out) {
  validate_config(cfg, false);
  Problem problem = load_problem(cfg);
  SparseSym a = build_shifted_operator(problem.graph);
  if (a.n > kOracleMaxDim) throw ConfigError("verify needs n <= " + std::to_string(kOracleMaxDim));
  const Index k = cfg.ofm.k;
  int failures = 0;
  auto report = [&](bool ok, const std::string& what) {
    out << (ok ? "PASS " : "FAIL ") << what << '\n';
    if (!ok) ++failures;
  };

  // Theorem points are stationary.
  EigenPairs all = bottom_k_shifted(a, std::min<Index>(k + 1, a.n));
  if (k < a.n && all.values(k) - all.values(k - 1) <= 1e-3) {
    out << "SKIP theorem points: eigengap " << all.values(k) - all.values(k - 1) << " too small\n";
  } else {
    const double a_norm = a.frobenius_norm();
    for (Method m : kAllMethods) {
      FeatureMatrix x = all.vectors.leftCols(k);
      if (is_f1_family(m)) x = x * (-all.values.head(k)).cwiseSqrt().asDiagonal();
      const double r = direction(m, a, x).norm() / a_norm;
      report(r < 1e-8, std::string("theorem point of ") + std::string(method_name(m)) + ": |G|/|A| = " +
                           std::to_string(r));
    }
  }

  // Distributed SpMM and cost ledger.
  FeatureMatrix x = random_start(a.n, k, cfg.ofm.seed);
  FeatureMatrix serial = spmm_serial(a, x);
  for (int p : {4, 16}) {
    if (std::sqrt(static_cast<double>(p)) > static_cast<double>(a.n)) continue;
    ProcessGrid grid(a, p);
    CommLedger ledger;
    FeatureMatrix y = spmm_1p5d(grid, x, ledger, false);
    const double err = (y - serial).norm() / std::max(serial.norm(), 1e-300);
    report(err < 1e-12, "spmm_1p5d p=" + std::to_string(p) + ": rel err " + std::to_string(err));
    IterationCost c = measure_iteration_cost(cfg.method, a, k, p, cfg.ofm.seed);
    CostPrediction pred = predict_iteration_cost(cfg.method, a.nnz(), a.n, k, p);
    report(c.flops_per_process() == pred.flops && c.ledger.latency_events() == pred.comm_alpha_terms &&
               c.ledger.panel_words() == pred.comm_beta_words,
           "cost model p=" + std::to_string(p));
  }

  // Descent for the global methods.
  for (Method m : {Method::kOfmF1, Method::kOfmF2}) {
    OFMOptions o = cfg.ofm;
    o.max_iters = std::min(o.max_iters, 50);
    OFMResult r = run_ofm(m, a, o);
    bool monotone = true;
    for (std::size_t t = 1; t < r.objective_history.size(); ++t) {
      monotone = monotone && r.objective_history[t] <= r.objective_history[t - 1] + 1e-10;
    }
    report(monotone, std::string("monotone descent of ") + std::string(method_name(m)));
  }
  return failures == 0 ? kOk : kFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral clustering with orthogonalization-free eigensolvers"};
  app.require_subcommand(1);
  Flags flags;
  struct Sub {
    Command cmd;
    CLI::App* app;
  };
  std::vector<Sub> subs = {
      {Command::kGen, app.add_subcommand("gen", "write an SBM graph and its ground truth")},
      {Command::kCluster, app.add_subcommand("cluster", "run the clustering pipeline once")},
      {Command::kStream, app.add_subcommand("stream", "run the streaming pipeline")},
      {Command::kBench, app.add_subcommand("bench", "print predicted and simulated iteration costs")},
      {Command::kVerify, app.add_subcommand("verify", "check stationarity, SpMM and cost model on a graph")},
  };
  for (auto& s : subs) {
    CLI::App* sub = s.app;
    sub->add_option("--config", flags.config, "JSON configuration file");
    sub->add_option("--method", flags.method, "ofm-f1, triofm-f1, ofm-f2 or triofm-f2");
    sub->add_option_function<int>("--k", [&](int v) { flags.k = v; flags.has_k = true; }, "number of eigenvectors");
    sub->add_option_function<int>("--iters", [&](int v) { flags.iters = v; flags.has_iters = true; },
                                  "iteration budget (per stage for stream)");
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { flags.seed = v; flags.has_seed = true; },
                                            "random seed");
    sub->add_option("--out", flags.out, "output directory (default runs/<config hash>)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    for (const auto& s : subs) {
      if (!s.app->parsed()) continue;
      ExperimentConfig cfg = make_config(flags, s.cmd);
      switch (s.cmd) {
        case Command::kGen:
          return cmd_gen(cfg, out);
        case Command::kCluster:
          return cmd_cluster(cfg, out);
        case Command::kStream:
          return cmd_stream(cfg, out);
        case Command::kBench:
          return cmd_bench(cfg, out);
        case Command::kVerify:
          return cmd_verify(cfg, out);
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    err << "divergence at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kDivergence;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kIoError;
  } catch (const RangeError& e) {
    err << "input error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace ofm::cli
