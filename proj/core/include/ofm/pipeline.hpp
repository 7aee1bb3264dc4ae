#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ofm/clustering.hpp"
#include "ofm/driver.hpp"
#include "ofm/graph.hpp"
#include "ofm/types.hpp"

namespace ofm {

struct GraphSource {
  /// Edge list (or Matrix Market when the name ends in .mtx). Empty: use sbm.
  std::string edge_file;
  /// Optional ground-truth labels, one per line.
  std::string truth_file;
  SbmParams sbm;
};

struct StreamParams {
  std::size_t parts = 10;
  StreamMode mode = StreamMode::kEdgeSampling;
  /// Iteration budget of every stage, the first (cold) one included.
  int iters_per_stage = 2;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  GraphSource graph;
  Method method = Method::kOfmF1;
  OFMOptions ofm;
  /// Clusters for k-means; 0 means ofm.k.
  int clusters = 0;
  int kmeans_restarts = 10;
  int kmeans_max_iters = 300;
  std::uint64_t kmeans_seed = 0;
  /// Pipeline repeats whose indices are averaged. Each repeat reseeds
  /// k-means; the OFM start is reseeded too when rerandomize_init is set.
  int repeats = 1;
  bool rerandomize_init = false;
  std::optional<StreamParams> stream;
  /// Compute relerr (only for n <= kOracleMaxDim).
  bool oracle = true;
  std::string out_dir;
};

/// Parses the JSON configuration. Unknown keys, wrong types and inconsistent
/// values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& cfg);
/// 16 hex digits identifying the configuration.
std::string config_hash(const ExperimentConfig& cfg);
/// Throws ConfigError for inconsistent settings (k < 2, k > n, ...).
void validate_config(const ExperimentConfig& cfg, bool streaming);

struct Problem {
  Graph graph;
  std::optional<GroundTruth> truth;
};

/// Reads or generates the graph described by cfg.graph.
Problem load_problem(const ExperimentConfig& cfg);

struct ClusteringRun {
  Method method = Method::kOfmF1;
  Index n = 0;
  Index k = 0;
  Labeling labels;
  /// Absent when there is no ground truth (or no oracle for relerr).
  std::optional<double> ari;
  std::optional<double> nmi;
  std::optional<double> relerr;
  int iterations = 0;
  double wall_time = 0.0;
  std::optional<std::size_t> stage;
  /// Optimizer output of the first repeat.
  OFMResult ofm;
};

/// Build A, run the optimizer, normalize rows, k-means, score.
ClusteringRun run_pipeline(const ExperimentConfig& cfg);
ClusteringRun run_pipeline(const ExperimentConfig& cfg, const Problem& problem);

/// Clusters the rows of given features and scores them against `truth`.
/// Used for oracle features and Rayleigh-Ritz vectors.
ClusteringRun cluster_features(const ExperimentConfig& cfg, const FeatureMatrix& features,
                               const std::optional<GroundTruth>& truth);

/// One run per stage over prefixes of the edge stream; stage s > 0 starts
/// from the features of stage s - 1.
std::vector<ClusteringRun> run_streaming(const ExperimentConfig& cfg);
std::vector<ClusteringRun> run_streaming(const ExperimentConfig& cfg, const Problem& problem);

/// One results.csv row.
struct ResultRow {
  std::string method;
  Index n = 0;
  Index k = 0;
  int iters = 0;
  std::optional<double> ari;
  std::optional<double> nmi;
  std::optional<double> relerr;
  double seconds = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

ResultRow summarize(const ClusteringRun& run);

/// Header method,n,k,iters,ari,nmi,relerr,seconds. Absent values are empty
/// fields; reals are written in shortest round-trip form.
void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

void write_labels(std::ostream& out, const Labeling& labels);
/// One non-negative integer per line; n_clusters is max + 1.
Labeling read_labels(std::istream& in);

/// Header iteration,objective,grad_norm,step. Per-column steps are joined
/// with ';'.
void write_history_csv(std::ostream& out, const OFMResult& result);

/// Writes results.csv for all runs plus labels.txt and history.csv of the
/// last run into `dir` (created if needed). Throws IoError.
void write_outputs(const std::filesystem::path& dir, std::span<const ClusteringRun> runs);

}  // namespace ofm
