#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "ofm/driver.hpp"
#include "ofm/graph.hpp"
#include "ofm/types.hpp"

namespace ofm {

// Simulated A-Stationary 1.5D SpMM on a sqrt(p) x sqrt(p) process grid.
//
// Logical processes run inside one program. Process P(i, j) owns
//   A[i, j]            block row i, block column j of A,
//   X[j * side + i]    a row block of every N x k panel ("X layout"),
//   Y[i * side + j]    the row block of an SpMM result before redistribution.
// Collectives are executed as plain sums in ascending process order and their
// costs are charged analytically to a CommLedger under the alpha-beta model:
//   allgather / reduce-scatter over a grid column / row: alpha log p + beta Nk/sqrt(p)
//   allreduce of w words per process:                   2 alpha log p + 2 beta w log p
// with log = log2. Redistributing Y back to the X layout costs one more
// allgather + reduce-scatter pair, which doubles the SpMM communication.

struct CollectiveTally {
  double latency_events = 0.0;  // multiples of alpha
  double words = 0.0;           // multiples of beta
  int calls = 0;

  CollectiveTally& operator+=(const CollectiveTally& o) {
    latency_events += o.latency_events;
    words += o.words;
    calls += o.calls;
    return *this;
  }
  friend bool operator==(const CollectiveTally&, const CollectiveTally&) = default;
};

struct CommLedger {
  CollectiveTally allgather;
  CollectiveTally reduce_scatter;
  CollectiveTally redistribute;
  /// Allreduces of Gram products (X^T Y), charged at Nk/p words per process.
  CollectiveTally allreduce;
  /// Allreduces of O(k) column sums (momentum coefficients, norms).
  CollectiveTally allreduce_scalar;

  double latency_events() const;
  double words_moved() const;
  /// Words excluding the O(k) scalar allreduces.
  double panel_words() const { return words_moved() - allreduce_scalar.words; }

  CommLedger& operator+=(const CommLedger& o);
  friend CommLedger operator+(CommLedger a, const CommLedger& b) { return a += b; }
  friend bool operator==(const CommLedger&, const CommLedger&) = default;
};

/// Flops summed over all processes. Replicated k x k work is not counted.
struct FlopTally {
  std::uint64_t spmm = 0;
  std::uint64_t gram = 0;
  std::uint64_t panel_small = 0;  // panel times k x k matrix
  std::uint64_t elementwise = 0;

  std::uint64_t total() const { return spmm + gram + panel_small + elementwise; }
};

/// Rectangular CSR block of A with block-local column indices.
struct CsrBlock {
  Index rows = 0;
  Index cols = 0;
  Index row_offset = 0;
  Index col_offset = 0;
  std::vector<Index> row_ptr;
  std::vector<Index> col_idx;
  std::vector<double> values;

  Index nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }
};

struct GridCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

class ProcessGrid {
 public:
  /// Requires p to be a perfect square with sqrt(p) <= a.n.
  ProcessGrid(const SparseSym& a, int p);

  int p() const { return p_; }
  int side() const { return side_; }
  Index n() const { return n_; }
  Index nnz() const { return nnz_; }

  /// side + 1 boundaries of the A block rows/columns (ceil partition of [0, n)).
  std::span<const Index> block_bounds() const { return block_bounds_; }
  /// p + 1 boundaries of the panel row blocks; block b lies inside A block
  /// b / side.
  std::span<const Index> panel_bounds() const { return panel_bounds_; }
  Index panel_rows(int b) const { return panel_bounds_[b + 1] - panel_bounds_[b]; }

  const CsrBlock& a_block(int i, int j) const { return blocks_[static_cast<std::size_t>(i * side_ + j)]; }

  int x_block_of(GridCoord c) const { return c.col * side_ + c.row; }
  int y_block_of(GridCoord c) const { return c.row * side_ + c.col; }
  GridCoord x_owner(int b) const { return {b % side_, b / side_}; }
  GridCoord y_owner(int b) const { return {b / side_, b % side_}; }

 private:
  int p_;
  int side_;
  Index n_;
  Index nnz_;
  std::vector<Index> block_bounds_;
  std::vector<Index> panel_bounds_;
  std::vector<CsrBlock> blocks_;
};

enum class PanelLayout { kX, kY };

/// An N x k panel split into p row blocks. blocks[b] lives on x_owner(b) in
/// the X layout and on y_owner(b) in the Y layout.
struct DistributedPanel {
  Index cols = 0;
  PanelLayout layout = PanelLayout::kX;
  std::vector<FeatureMatrix> blocks;
};

DistributedPanel scatter(const ProcessGrid& grid, const FeatureMatrix& x);
FeatureMatrix gather(const ProcessGrid& grid, const DistributedPanel& panel);

struct PartitionedProblem {
  ProcessGrid grid;
  DistributedPanel x;
};

/// Splits A into the 2D block grid and X into p row blocks. Throws
/// ArgumentError when p is not a perfect square.
PartitionedProblem partition_1p5d(const SparseSym& a, const FeatureMatrix& x, int p);

/// Y = A X. With `redistribute` the result comes back in the X layout and the
/// ledger is charged for the extra pass.
DistributedPanel spmm_1p5d(const ProcessGrid& grid, const DistributedPanel& x, CommLedger& ledger,
                           bool redistribute = true, FlopTally* flops = nullptr);

FeatureMatrix spmm_1p5d(const ProcessGrid& grid, const FeatureMatrix& x, CommLedger& ledger,
                        bool redistribute = true, FlopTally* flops = nullptr);

/// (2 log2 p, 2 n_words log2 p) for an allreduce of n_words words per process.
std::pair<double, double> allreduce_cost(double n_words, int p);

/// Per-process, per-iteration cost of a method (flops divided by p; alpha and
/// beta multiples). Lower-order O(k^3) replicated work and the words of the
/// O(k) scalar allreduce are omitted (its latency is counted), matching the
/// k << N closed forms:
///   f1 family: (4k nnz + 12Nk^2 + 12Nk)/p flops, 20 log p alpha,
///              8Nk/sqrt(p) + 10Nk log p / p words
///   f2 family: (4k nnz + 16Nk^2 + 14Nk)/p flops, 22 log p alpha,
///              8Nk/sqrt(p) + 12Nk log p / p words
/// For p that is not a power of 4 the log is fractional.
struct CostPrediction {
  double flops = 0.0;
  double comm_alpha_terms = 0.0;
  double comm_beta_words = 0.0;
};

CostPrediction predict_iteration_cost(Method method, Index nnz, Index n, Index k, int p);

/// p * max block nnz / nnz(A). Throws ArgumentError when A has no nonzeros.
double load_imbalance(const ProcessGrid& grid);

/// Iteration backend that routes every panel operation through the process
/// grid and charges the ledger and flop tally.
///
/// Panel-local elementwise work is charged per phase at fixed per-entry
/// rates: direction assembly 1 (f1 family) or 3 (f2 family), momentum 7,
/// line search 2, update 2 flops per panel entry.
class SimulatedBackend final : public IterationBackend {
 public:
  SimulatedBackend(const ProcessGrid& grid) : grid_(grid) {}

  FeatureMatrix spmm(const FeatureMatrix& x) override;
  SmallMatrix gram(const FeatureMatrix& a, const FeatureMatrix& b) override;
  FeatureMatrix mul_small(const FeatureMatrix& panel, const SmallMatrix& m) override;
  std::vector<double> column_dots(
      std::span<const std::pair<const FeatureMatrix*, const FeatureMatrix*>> pairs) override;
  void phase_done(Method method, IterationPhase phase) override;

  const CommLedger& ledger() const { return ledger_; }
  const FlopTally& flops() const { return flops_; }
  void reset() {
    ledger_ = {};
    flops_ = {};
  }

 private:
  const ProcessGrid& grid_;
  CommLedger ledger_;
  FlopTally flops_;
  Index panel_cols_ = 0;
};

struct IterationCost {
  CommLedger ledger;
  FlopTally flops;
  int p = 1;
  /// flops.total() / p, comparable with CostPrediction::flops.
  double flops_per_process() const { return static_cast<double>(flops.total()) / p; }
};

/// Cost of one steady-state iteration (direction, momentum, line search,
/// update) of `method` on `a` with k columns on p simulated processes. The
/// first update (no momentum) is run beforehand and not counted.
IterationCost measure_iteration_cost(Method method, const SparseSym& a, Index k, int p,
                                     std::uint64_t seed);

struct CostRow {
  Method method;
  Index n = 0;
  Index k = 0;
  int p = 1;
  CostPrediction cost;
};

/// CSV with header method,N,k,p,flops,alpha_terms,beta_words.
void write_cost_csv(std::ostream& out, std::span<const CostRow> rows);

}  // namespace ofm
