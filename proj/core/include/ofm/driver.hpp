#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ofm/errors.hpp"
#include "ofm/graph.hpp"
#include "ofm/linesearch.hpp"
#include "ofm/types.hpp"

namespace ofm {

struct OFMOptions {
  Index k = 2;
  int max_iters = 100;
  /// Stop once ||G||_F < grad_tol * ||G^(0)||_F.
  double grad_tol = 1e-2;
  /// Also stop once ||G||_F <= abs_tol * ||A||_F. Set to 0 to disable.
  double abs_tol = 1e-12;
  std::uint64_t seed = 0;
  /// Fixed step used when use_linesearch is false.
  double initial_step = 0.1;
  bool use_linesearch = true;
  /// Polak-Ribiere+ restart: negative momentum coefficients become 0.
  bool beta_clamp = true;
};

struct OFMResult {
  FeatureMatrix x;
  int iterations = 0;
  /// Entry t belongs to iterate X^(t), the point updated in iteration t.
  std::vector<double> objective_history;
  std::vector<double> grad_norm_history;
  std::vector<StepSizes> step_history;
  bool converged = false;
  /// ||G||_F at the final iterate.
  double final_grad_norm = 0.0;
};

/// Raised when an iterate or direction stops being finite. Holds the last
/// finite iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, FeatureMatrix last_x, int iteration)
      : Error(what), last_x_(std::move(last_x)), iteration_(iteration) {}

  const FeatureMatrix& last_x() const noexcept { return last_x_; }
  int iteration() const noexcept { return iteration_; }

 private:
  FeatureMatrix last_x_;
  int iteration_;
};

/// Per-column Polak-Ribiere coefficients
///   beta_i = sum((G_now - G_prev) .* G_now)_i / sum(G_prev .* G_prev)_i,
/// 0 when the denominator is below 1e-300, clamped at 0 when `clamp` is set.
std::vector<double> momentum_betas(const FeatureMatrix& g_now, const FeatureMatrix& g_prev,
                                   bool clamp);

/// Same rule from column sums that were reduced elsewhere.
std::vector<double> betas_from_sums(std::span<const double> numerator,
                                    std::span<const double> denominator, bool clamp);

/// i.i.d. standard normal entries scaled by 1/sqrt(n).
FeatureMatrix random_start(Index n, Index k, std::uint64_t seed);

/// Phases of one iteration, reported to the backend when their panel-local
/// work is done.
enum class IterationPhase { kDirection, kMomentum, kLineSearch, kUpdate };

/// Data-movement primitives of one iteration. The serial backend evaluates
/// them directly; the simulated distributed backend in parallel.hpp routes them
/// through a process grid and charges communication costs.
class IterationBackend {
 public:
  virtual ~IterationBackend() = default;

  virtual FeatureMatrix spmm(const FeatureMatrix& x) = 0;
  /// a^T b.
  virtual SmallMatrix gram(const FeatureMatrix& a, const FeatureMatrix& b) = 0;
  /// panel * m for a k x k matrix m.
  virtual FeatureMatrix mul_small(const FeatureMatrix& panel, const SmallMatrix& m) = 0;
  /// For each pair (a, b), the k column sums of a .* b, concatenated in pair
  /// order. Reduced in a single collective.
  virtual std::vector<double> column_dots(
      std::span<const std::pair<const FeatureMatrix*, const FeatureMatrix*>> pairs) = 0;
  virtual void phase_done(Method, IterationPhase) {}
};

class SerialBackend final : public IterationBackend {
 public:
  explicit SerialBackend(const SparseSym& a) : a_(a) {}

  FeatureMatrix spmm(const FeatureMatrix& x) override;
  SmallMatrix gram(const FeatureMatrix& a, const FeatureMatrix& b) override;
  FeatureMatrix mul_small(const FeatureMatrix& panel, const SmallMatrix& m) override;
  std::vector<double> column_dots(
      std::span<const std::pair<const FeatureMatrix*, const FeatureMatrix*>> pairs) override;

  int spmm_count() const { return spmm_count_; }

 private:
  const SparseSym& a_;
  int spmm_count_ = 0;
};

/// The orthogonalization-free iteration: direction, column-wise nonlinear CG
/// momentum, exact line search, update. run_ofm() drives it to completion;
/// the class is exposed so a caller can advance single iterations (e.g. to
/// account the cost of one iteration).
class OFMSolver {
 public:
  OFMSolver(Method method, const SparseSym& a, OFMOptions opts, IterationBackend& backend);

  /// Evaluates G^(0) at x0 and performs the first update (beta = 0). Returns
  /// false when x0 already satisfies the stopping rule.
  bool start(FeatureMatrix x0);

  /// One more iteration. Returns false when the stopping rule fires (no update
  /// is made in that case) or when max_iters updates have been made.
  bool step();

  const FeatureMatrix& x() const { return x_; }
  /// Search direction of the most recent update.
  const FeatureMatrix& search_direction() const { return v_; }
  const OFMResult& result() const { return result_; }
  OFMResult take_result();

 private:
  struct Evaluation {
    FeatureMatrix w;  // AX
    SmallMatrix xtx;
    SmallMatrix xtax;  // f2 family only
    FeatureMatrix g;
  };

  Evaluation evaluate_direction();
  bool should_stop(double grad_norm) const;
  void line_search_and_update(const Evaluation& eval);
  void check_finite(const FeatureMatrix& m, const char* what) const;

  Method method_;
  const SparseSym& a_;
  OFMOptions opts_;
  IterationBackend& backend_;
  double a_norm_ = 0.0;
  double a_norm2_ = 0.0;
  double g0_norm_ = 0.0;

  FeatureMatrix x_;
  FeatureMatrix v_;
  FeatureMatrix g_prev_;
  std::vector<double> g_prev_sq_;  // column sums of G_prev .* G_prev
  OFMResult result_;
  bool finished_ = false;
};

/// Runs the full iteration. Cold starts draw X^(0) from random_start(n, k,
/// opts.seed); `warm_start` must be n x k when given.
OFMResult run_ofm(Method method, const SparseSym& a, const OFMOptions& opts,
                  const std::optional<FeatureMatrix>& warm_start = std::nullopt);

}  // namespace ofm
