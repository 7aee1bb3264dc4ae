#include "ofm/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ofm/eig_oracle.hpp"
#include "ofm/errors.hpp"

namespace ofm {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <class T>
void read_value(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string stream_mode_name(StreamMode m) { return m == StreamMode::kSnowball ? "snowball" : "edge"; }

StreamMode parse_stream_mode(const std::string& s) {
  if (s == "edge") return StreamMode::kEdgeSampling;
  if (s == "snowball") return StreamMode::kSnowball;
  throw ConfigError("stream mode must be 'edge' or 'snowball', got '" + s + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

long long parse_int(const std::string& s, std::size_t line) {
  long long v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cluster_count(const ExperimentConfig& cfg) {
  return cfg.clusters > 0 ? cfg.clusters : static_cast<int>(cfg.ofm.k);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t r) {
  // splitmix64 step, so consecutive repeats get unrelated streams.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (r + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Scores {
  Labeling labels;
  std::optional<double> ari;
  std::optional<double> nmi;
};

Scores score_features(const ExperimentConfig& cfg, const FeatureMatrix& features,
                      const std::optional<GroundTruth>& truth, int repeat) {
  KMeansOptions km;
  km.k = cluster_count(cfg);
  km.seed = repeat == 0 ? cfg.kmeans_seed : mix_seed(cfg.kmeans_seed, static_cast<std::uint64_t>(repeat));
  km.n_init = cfg.kmeans_restarts;
  km.max_iters = cfg.kmeans_max_iters;
  KMeansResult res = kmeans(normalize_rows(features), km);
  Scores s;
  s.labels = std::move(res.labeling);
  if (truth) {
    Labeling t{truth->labels, std::max(truth->n_blocks, 1)};
    s.ari = ari(t, s.labels);
    s.nmi = nmi(t, s.labels);
  }
  return s;
}

ClusteringRun cluster_graph(const ExperimentConfig& cfg, const Graph& graph,
                            const std::optional<GroundTruth>& truth, const OFMOptions& opts,
                            const std::optional<FeatureMatrix>& warm) {
  const auto t0 = std::chrono::steady_clock::now();
  SparseSym a = build_shifted_operator(graph);
  if (opts.k > a.n) throw ConfigError("k exceeds the number of nodes");

  ClusteringRun run;
  run.method = cfg.method;
  run.n = a.n;
  run.k = opts.k;
  double ari_sum = 0.0;
  double nmi_sum = 0.0;
  for (int r = 0; r < cfg.repeats; ++r) {
    OFMResult res;
    if (r == 0 || cfg.rerandomize_init) {
      OFMOptions o = opts;
      if (r > 0) o.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(r));
      res = run_ofm(cfg.method, a, o, r == 0 ? warm : std::nullopt);
    }
    const FeatureMatrix& x = r == 0 || cfg.rerandomize_init ? res.x : run.ofm.x;
    Scores s = score_features(cfg, x, truth, r);
    if (r == 0) {
      run.labels = std::move(s.labels);
      run.iterations = res.iterations;
      run.ofm = std::move(res);
    }
    if (s.ari) ari_sum += *s.ari;
    if (s.nmi) nmi_sum += *s.nmi;
  }
  if (truth) {
    run.ari = ari_sum / cfg.repeats;
    run.nmi = nmi_sum / cfg.repeats;
  }
  if (cfg.oracle && a.n <= kOracleMaxDim) run.relerr = relative_residual(a, run.ofm.x);
  run.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"graph", "method", "k", "clusters", "ofm", "kmeans", "repeats", "rerandomize_init", "stream",
              "oracle", "out"});
  ExperimentConfig cfg;

  if (auto it = root.find("graph"); it != root.end()) {
    check_keys(*it, "graph", {"edges", "truth", "sbm"});
    read_value(*it, "edges", cfg.graph.edge_file);
    read_value(*it, "truth", cfg.graph.truth_file);
    if (auto s = it->find("sbm"); s != it->end()) {
      check_keys(*s, "graph.sbm", {"n", "blocks", "p_in", "p_out", "size_variation", "seed"});
      read_value(*s, "n", cfg.graph.sbm.n);
      read_value(*s, "blocks", cfg.graph.sbm.blocks);
      read_value(*s, "p_in", cfg.graph.sbm.p_in);
      read_value(*s, "p_out", cfg.graph.sbm.p_out);
      read_value(*s, "size_variation", cfg.graph.sbm.size_variation);
      read_value(*s, "seed", cfg.graph.sbm.seed);
    }
  }
  if (auto it = root.find("method"); it != root.end()) {
    std::string name;
    read_value(root, "method", name);
    auto m = parse_method(name);
    if (!m) throw ConfigError("unknown method '" + name + "'");
    cfg.method = *m;
  }
  read_value(root, "k", cfg.ofm.k);
  read_value(root, "clusters", cfg.clusters);
  if (auto it = root.find("ofm"); it != root.end()) {
    check_keys(*it, "ofm",
               {"max_iters", "grad_tol", "abs_tol", "seed", "linesearch", "initial_step", "beta_clamp"});
    read_value(*it, "max_iters", cfg.ofm.max_iters);
    read_value(*it, "grad_tol", cfg.ofm.grad_tol);
    read_value(*it, "abs_tol", cfg.ofm.abs_tol);
    read_value(*it, "seed", cfg.ofm.seed);
    read_value(*it, "linesearch", cfg.ofm.use_linesearch);
    read_value(*it, "initial_step", cfg.ofm.initial_step);
    read_value(*it, "beta_clamp", cfg.ofm.beta_clamp);
  }
  if (auto it = root.find("kmeans"); it != root.end()) {
    check_keys(*it, "kmeans", {"restarts", "max_iters", "seed"});
    read_value(*it, "restarts", cfg.kmeans_restarts);
    read_value(*it, "max_iters", cfg.kmeans_max_iters);
    read_value(*it, "seed", cfg.kmeans_seed);
  }
  read_value(root, "repeats", cfg.repeats);
  read_value(root, "rerandomize_init", cfg.rerandomize_init);
  if (auto it = root.find("stream"); it != root.end() && !it->is_null()) {
    check_keys(*it, "stream", {"parts", "mode", "iters_per_stage", "seed"});
    StreamParams sp;
    read_value(*it, "parts", sp.parts);
    std::string mode = stream_mode_name(sp.mode);
    read_value(*it, "mode", mode);
    sp.mode = parse_stream_mode(mode);
    read_value(*it, "iters_per_stage", sp.iters_per_stage);
    read_value(*it, "seed", sp.seed);
    cfg.stream = sp;
  }
  read_value(root, "oracle", cfg.oracle);
  read_value(root, "out", cfg.out_dir);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json root;
  root["graph"] = {{"edges", cfg.graph.edge_file},
                   {"truth", cfg.graph.truth_file},
                   {"sbm",
                    {{"n", cfg.graph.sbm.n},
                     {"blocks", cfg.graph.sbm.blocks},
                     {"p_in", cfg.graph.sbm.p_in},
                     {"p_out", cfg.graph.sbm.p_out},
                     {"size_variation", cfg.graph.sbm.size_variation},
                     {"seed", cfg.graph.sbm.seed}}}};
  root["method"] = std::string(method_name(cfg.method));
  root["k"] = cfg.ofm.k;
  root["clusters"] = cfg.clusters;
  root["ofm"] = {{"max_iters", cfg.ofm.max_iters},       {"grad_tol", cfg.ofm.grad_tol},
                 {"abs_tol", cfg.ofm.abs_tol},           {"seed", cfg.ofm.seed},
                 {"linesearch", cfg.ofm.use_linesearch}, {"initial_step", cfg.ofm.initial_step},
                 {"beta_clamp", cfg.ofm.beta_clamp}};
  root["kmeans"] = {
      {"restarts", cfg.kmeans_restarts}, {"max_iters", cfg.kmeans_max_iters}, {"seed", cfg.kmeans_seed}};
  root["repeats"] = cfg.repeats;
  root["rerandomize_init"] = cfg.rerandomize_init;
  if (cfg.stream) {
    root["stream"] = {{"parts", cfg.stream->parts},
                      {"mode", stream_mode_name(cfg.stream->mode)},
                      {"iters_per_stage", cfg.stream->iters_per_stage},
                      {"seed", cfg.stream->seed}};
  } else {
    root["stream"] = nullptr;
  }
  root["oracle"] = cfg.oracle;
  root["out"] = cfg.out_dir;
  return root.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.out_dir.clear();
  const std::string text = config_to_json(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate_config(const ExperimentConfig& cfg, bool streaming) {
  if (cfg.ofm.k < 2) throw ConfigError("clustering runs need k >= 2");
  if (cfg.ofm.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (cfg.ofm.grad_tol < 0.0 || cfg.ofm.abs_tol < 0.0) throw ConfigError("tolerances must be non-negative");
  if (cfg.clusters < 0) throw ConfigError("clusters must be non-negative");
  if (cfg.kmeans_restarts < 1 || cfg.kmeans_max_iters < 1) throw ConfigError("k-means settings must be >= 1");
  if (cfg.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (cfg.graph.edge_file.empty()) {
    const auto& s = cfg.graph.sbm;
    if (s.n == 0) throw ConfigError("no graph source: give graph.edges or graph.sbm.n");
    if (static_cast<std::size_t>(cfg.ofm.k) > s.n) throw ConfigError("k exceeds the number of nodes");
  }
  if (streaming) {
    if (!cfg.stream) throw ConfigError("stream parameters missing");
    if (cfg.stream->parts < 1) throw ConfigError("stream.parts must be at least 1");
    if (cfg.stream->iters_per_stage < 1) throw ConfigError("stream.iters_per_stage must be at least 1");
  } else if (cfg.stream) {
    throw ConfigError("stream parameters are only valid for streaming runs");
  }
}

Problem load_problem(const ExperimentConfig& cfg) {
  Problem prob;
  if (cfg.graph.edge_file.empty()) {
    auto [g, truth] = generate_sbm(cfg.graph.sbm);
    prob.graph = std::move(g);
    prob.truth = std::move(truth);
  } else {
    std::ifstream in(cfg.graph.edge_file);
    if (!in) throw IoError("cannot read graph " + cfg.graph.edge_file);
    prob.graph = ends_with(cfg.graph.edge_file, ".mtx") ? load_matrix_market(in) : load_edge_list(in);
  }
  if (!cfg.graph.truth_file.empty()) {
    std::ifstream in(cfg.graph.truth_file);
    if (!in) throw IoError("cannot read truth " + cfg.graph.truth_file);
    Labeling l = read_labels(in);
    if (l.labels.size() != prob.graph.n_nodes) {
      throw RangeError("truth has " + std::to_string(l.labels.size()) + " labels for " +
                       std::to_string(prob.graph.n_nodes) + " nodes");
    }
    prob.truth = GroundTruth{std::move(l.labels), l.n_clusters};
  }
  return prob;
}

ClusteringRun run_pipeline(const ExperimentConfig& cfg) {
  validate_config(cfg, false);
  return run_pipeline(cfg, load_problem(cfg));
}

ClusteringRun run_pipeline(const ExperimentConfig& cfg, const Problem& problem) {
  if (cfg.ofm.k > static_cast<Index>(problem.graph.n_nodes)) throw ArgumentError("k exceeds the number of nodes");
  return cluster_graph(cfg, problem.graph, problem.truth, cfg.ofm, std::nullopt);
}

ClusteringRun cluster_features(const ExperimentConfig& cfg, const FeatureMatrix& features,
                               const std::optional<GroundTruth>& truth) {
  ClusteringRun run;
  run.method = cfg.method;
  run.n = features.rows();
  run.k = features.cols();
  double ari_sum = 0.0;
  double nmi_sum = 0.0;
  for (int r = 0; r < cfg.repeats; ++r) {
    Scores s = score_features(cfg, features, truth, r);
    if (r == 0) run.labels = std::move(s.labels);
    if (s.ari) ari_sum += *s.ari;
    if (s.nmi) nmi_sum += *s.nmi;
  }
  if (truth) {
    run.ari = ari_sum / cfg.repeats;
    run.nmi = nmi_sum / cfg.repeats;
  }
  return run;
}

std::vector<ClusteringRun> run_streaming(const ExperimentConfig& cfg) {
  validate_config(cfg, true);
  return run_streaming(cfg, load_problem(cfg));
}

std::vector<ClusteringRun> run_streaming(const ExperimentConfig& cfg, const Problem& problem) {
  if (!cfg.stream) throw ConfigError("stream parameters missing");
  const StreamParams& sp = *cfg.stream;
  StreamPlan plan = split_stream(problem.graph, sp.parts, sp.mode, sp.seed);
  OFMOptions opts = cfg.ofm;
  opts.max_iters = sp.iters_per_stage;

  std::vector<ClusteringRun> runs;
  std::optional<FeatureMatrix> warm;
  for (std::size_t s = 0; s < plan.parts.size(); ++s) {
    Graph g = stream_prefix(plan, problem.graph.n_nodes, s);
    ClusteringRun run = cluster_graph(cfg, g, problem.truth, opts, warm);
    run.stage = s;
    warm = run.ofm.x;
    runs.push_back(std::move(run));
  }
  return runs;
}

ResultRow summarize(const ClusteringRun& run) {
  ResultRow r;
  r.method = std::string(method_name(run.method));
  r.n = run.n;
  r.k = run.k;
  r.iters = run.iterations;
  r.ari = run.ari;
  r.nmi = run.nmi;
  r.relerr = run.relerr;
  r.seconds = run.wall_time;
  return r;
}

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "method,n,k,iters,ari,nmi,relerr,seconds\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.n << ',' << r.k << ',' << r.iters << ',' << opt(r.ari) << ',' << opt(r.nmi)
        << ',' << opt(r.relerr) << ',' << format_double(r.seconds) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != "method,n,k,iters,ari,nmi,relerr,seconds") {
    throw ParseError("missing results header", lineno);
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 8) throw ParseError("expected 8 fields", lineno);
    auto opt = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return parse_double(s, lineno);
    };
    ResultRow r;
    r.method = f[0];
    r.n = static_cast<Index>(parse_int(f[1], lineno));
    r.k = static_cast<Index>(parse_int(f[2], lineno));
    r.iters = static_cast<int>(parse_int(f[3], lineno));
    r.ari = opt(f[4]);
    r.nmi = opt(f[5]);
    r.relerr = opt(f[6]);
    r.seconds = parse_double(f[7], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_labels(std::ostream& out, const Labeling& labels) {
  for (int l : labels.labels) out << l << '\n';
}

Labeling read_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  int most = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line[0] == '%') continue;
    const long long v = parse_int(line, lineno);
    if (v < 0 || v > std::numeric_limits<int>::max()) throw ParseError("label out of range", lineno);
    labels.push_back(static_cast<int>(v));
    most = std::max(most, static_cast<int>(v));
  }
  return Labeling{std::move(labels), std::max(most + 1, 1)};
}

void write_history_csv(std::ostream& out, const OFMResult& result) {
  out << "iteration,objective,grad_norm,step\n";
  for (std::size_t t = 0; t < result.objective_history.size(); ++t) {
    out << t << ',' << format_double(result.objective_history[t]) << ','
        << format_double(result.grad_norm_history[t]) << ',';
    if (t < result.step_history.size()) {
      const auto& s = result.step_history[t].values;
      for (std::size_t i = 0; i < s.size(); ++i) out << (i ? ";" : "") << format_double(s[i]);
    }
    out << '\n';
  }
}

void write_outputs(const std::filesystem::path& dir, std::span<const ClusteringRun> runs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<ResultRow> rows;
  for (const auto& r : runs) rows.push_back(summarize(r));
  {
    auto out = open_out(dir / "results.csv");
    write_results_csv(out, rows);
    if (!out) throw IoError("write failed: results.csv");
  }
  if (runs.empty()) return;
  {
    auto out = open_out(dir / "labels.txt");
    write_labels(out, runs.back().labels);
    if (!out) throw IoError("write failed: labels.txt");
  }
  {
    auto out = open_out(dir / "history.csv");
    write_history_csv(out, runs.back().ofm);
    if (!out) throw IoError("write failed: history.csv");
  }
}

}  // namespace ofm
