#pragma once

#include <cstdint>
#include <vector>

#include "ofm/types.hpp"

namespace ofm {

struct Labeling {
  std::vector<int> labels;
  int n_clusters = 1;
};

/// Validates ids in [0, n_clusters) and builds a Labeling.
Labeling make_labeling(std::vector<int> labels, int n_clusters);

/// Unit Euclidean rows; rows with norm below 1e-300 stay zero.
FeatureMatrix normalize_rows(const FeatureMatrix& x);

struct KMeansOptions {
  int k = 2;
  std::uint64_t seed = 0;
  int n_init = 10;
  int max_iters = 300;
};

struct KMeansResult {
  Labeling labeling;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
  int best_restart = 0;
  /// Inertia after each Lloyd assignment of the winning restart.
  std::vector<double> inertia_trace;
};

/// Lloyd's algorithm with k-means++ seeding and `n_init` restarts; the lowest
/// inertia wins (ties to the lowest restart index). Restart r draws from a
/// generator seeded by (seed, r). A cluster that empties is refilled with the
/// point farthest from its assigned centroid.
KMeansResult kmeans(const FeatureMatrix& x, const KMeansOptions& opts);

/// Adjusted Rand index from the pair-counting contingency table. Two identical
/// trivial partitions (where the index is 0/0) score 1.
double ari(const Labeling& truth, const Labeling& pred);

/// 2 I(U;V) / (H(U) + H(V)), natural logarithms. Both entropies zero gives 1,
/// exactly one zero gives 0.
double nmi(const Labeling& truth, const Labeling& pred);

}  // namespace ofm
