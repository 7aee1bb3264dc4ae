#include "ofm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "ofm/errors.hpp"

namespace ofm {

namespace {

double choose2(double n) { return 0.5 * n * (n - 1.0); }

struct Contingency {
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows;
  std::map<int, double> cols;
  double n = 0.0;
};

Contingency contingency(const Labeling& truth, const Labeling& pred) {
  if (truth.labels.size() != pred.labels.size()) {
    throw DimensionError("labelings have different lengths");
  }
  Contingency t;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    t.cells[{truth.labels[i], pred.labels[i]}] += 1.0;
    t.rows[truth.labels[i]] += 1.0;
    t.cols[pred.labels[i]] += 1.0;
  }
  t.n = static_cast<double>(truth.labels.size());
  return t;
}

double sq_dist(const Eigen::Ref<const Eigen::RowVectorXd>& a,
               const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  return (a - b).squaredNorm();
}

struct Run {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> trace;
};

Eigen::MatrixXd seed_plus_plus(const FeatureMatrix& x, int k, std::mt19937_64& rng) {
  const Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist(x.row(i), centers.row(0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    Index chosen = n - 1;
    if (total <= 0.0) {
      chosen = first(rng);
    } else {
      const double target = unif(rng) * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(c) = x.row(chosen);
    for (Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], sq_dist(x.row(i), centers.row(c)));
    }
  }
  return centers;
}

Run lloyd(const FeatureMatrix& x, Eigen::MatrixXd centers, int max_iters) {
  const Index n = x.rows();
  const int k = static_cast<int>(centers.rows());
  Run run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));

  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(x.row(i), centers.row(0));
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(x.row(i), centers.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      auto& slot = run.labels[static_cast<std::size_t>(i)];
      if (slot != best) changed = true;
      slot = best;
      dist[static_cast<std::size_t>(i)] = best_d;
      inertia += best_d;
    }

    // Refill empty clusters with the worst-served points.
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (int l : run.labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const auto li = static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)]);
        if (counts[li] <= 1) continue;
        if (dist[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      if (far_d < 0.0) break;
      --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      inertia -= dist[static_cast<std::size_t>(far)];
      dist[static_cast<std::size_t>(far)] = 0.0;
      centers.row(c) = x.row(far);
      changed = true;
    }
    run.trace.push_back(inertia);
    run.inertia = inertia;
    if (!changed && it > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    for (Index i = 0; i < n; ++i) sums.row(run.labels[static_cast<std::size_t>(i)]) += x.row(i);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }
  run.centroids = std::move(centers);
  return run;
}

}  // namespace

Labeling make_labeling(std::vector<int> labels, int n_clusters) {
  if (n_clusters < 1) throw ArgumentError("a labeling needs at least one cluster");
  for (int l : labels) {
    if (l < 0 || l >= n_clusters) throw RangeError("label outside [0, n_clusters)");
  }
  return Labeling{std::move(labels), n_clusters};
}

FeatureMatrix normalize_rows(const FeatureMatrix& x) {
  FeatureMatrix out = x;
  for (Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm < 1e-300) {
      out.row(i).setZero();
    } else {
      out.row(i) /= norm;
    }
  }
  return out;
}

KMeansResult kmeans(const FeatureMatrix& x, const KMeansOptions& opts) {
  if (opts.k < 1) throw ArgumentError("k-means needs k >= 1");
  if (opts.k > x.rows()) throw ArgumentError("k-means needs k <= number of points");
  if (opts.n_init < 1 || opts.max_iters < 1) throw ArgumentError("k-means needs n_init, max_iters >= 1");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.n_init; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    Run run = lloyd(x, seed_plus_plus(x, opts.k, rng), opts.max_iters);
    if (run.inertia < best.inertia) {
      best.labeling = Labeling{std::move(run.labels), opts.k};
      best.centroids = std::move(run.centroids);
      best.inertia = run.inertia;
      best.best_restart = r;
      best.inertia_trace = std::move(run.trace);
    }
  }
  return best;
}

double ari(const Labeling& truth, const Labeling& pred) {
  Contingency t = contingency(truth, pred);
  double index = 0.0;
  for (const auto& [key, count] : t.cells) index += choose2(count);
  double sum_a = 0.0;
  for (const auto& [key, count] : t.rows) sum_a += choose2(count);
  double sum_b = 0.0;
  for (const auto& [key, count] : t.cols) sum_b += choose2(count);
  const double total = choose2(t.n);
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double nmi(const Labeling& truth, const Labeling& pred) {
  Contingency t = contingency(truth, pred);
  if (t.n == 0.0) return 1.0;
  auto entropy = [&](const std::map<int, double>& marginal) {
    double h = 0.0;
    for (const auto& [key, count] : marginal) {
      const double p = count / t.n;
      h -= p * std::log(p);
    }
    return h;
  };
  const double hu = entropy(t.rows);
  const double hv = entropy(t.cols);
  if (hu + hv == 0.0) return 1.0;
  if (hu == 0.0 || hv == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, count] : t.cells) {
    const double a = t.rows.at(key.first);
    const double b = t.cols.at(key.second);
    mi += count / t.n * std::log(t.n * count / (a * b));
  }
  return 2.0 * mi / (hu + hv);
}

}  // namespace ofm
