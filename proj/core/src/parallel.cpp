#include "ofm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ofm/errors.hpp"

namespace ofm {

namespace {

using PanelPair = std::pair<const FeatureMatrix*, const FeatureMatrix*>;

double log2p(int p) { return std::log2(static_cast<double>(p)); }

std::vector<Index> ceil_bounds(Index begin, Index end, int parts) {
  const Index len = end - begin;
  const Index size = parts > 0 ? (len + parts - 1) / parts : 0;
  std::vector<Index> b(static_cast<std::size_t>(parts) + 1);
  for (int i = 0; i <= parts; ++i) b[static_cast<std::size_t>(i)] = begin + std::min(len, size * i);
  return b;
}

CollectiveTally tally(double latency, double words) { return CollectiveTally{latency, words, 1}; }

void local_spmm(const CsrBlock& blk, const FeatureMatrix& x, FeatureMatrix& y) {
  y.setZero(blk.rows, x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double* xc = x.col(c).data();
    double* yc = y.col(c).data();
    for (Index r = 0; r < blk.rows; ++r) {
      double acc = 0.0;
      for (Index e = blk.row_ptr[static_cast<std::size_t>(r)]; e < blk.row_ptr[static_cast<std::size_t>(r) + 1];
           ++e) {
        acc += blk.values[static_cast<std::size_t>(e)] * xc[blk.col_idx[static_cast<std::size_t>(e)]];
      }
      yc[r] = acc;
    }
  }
}

double elementwise_rate(Method method, IterationPhase phase) {
  switch (phase) {
    case IterationPhase::kDirection:
      return is_f1_family(method) ? 1.0 : 3.0;
    case IterationPhase::kMomentum:
      return 7.0;
    case IterationPhase::kLineSearch:
      return 2.0;
    case IterationPhase::kUpdate:
      return 2.0;
  }
  return 0.0;
}

}  // namespace

double CommLedger::latency_events() const {
  return allgather.latency_events + reduce_scatter.latency_events + redistribute.latency_events +
         allreduce.latency_events + allreduce_scalar.latency_events;
}

double CommLedger::words_moved() const {
  return allgather.words + reduce_scatter.words + redistribute.words + allreduce.words +
         allreduce_scalar.words;
}

CommLedger& CommLedger::operator+=(const CommLedger& o) {
  allgather += o.allgather;
  reduce_scatter += o.reduce_scatter;
  redistribute += o.redistribute;
  allreduce += o.allreduce;
  allreduce_scalar += o.allreduce_scalar;
  return *this;
}

ProcessGrid::ProcessGrid(const SparseSym& a, int p) : p_(p), n_(a.n), nnz_(a.nnz()) {
  if (p < 1) throw ArgumentError("process count must be positive");
  side_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(p))));
  if (side_ * side_ != p) {
    throw ArgumentError("process count " + std::to_string(p) + " is not a perfect square");
  }
  if (side_ > a.n) throw ArgumentError("grid side exceeds the operator dimension");

  block_bounds_ = ceil_bounds(0, n_, side_);
  panel_bounds_.assign(1, 0);
  for (int i = 0; i < side_; ++i) {
    auto sub = ceil_bounds(block_bounds_[static_cast<std::size_t>(i)],
                           block_bounds_[static_cast<std::size_t>(i) + 1], side_);
    panel_bounds_.insert(panel_bounds_.end(), sub.begin() + 1, sub.end());
  }

  std::vector<int> col_block(static_cast<std::size_t>(n_));
  for (int j = 0; j < side_; ++j) {
    for (Index c = block_bounds_[static_cast<std::size_t>(j)]; c < block_bounds_[static_cast<std::size_t>(j) + 1];
         ++c) {
      col_block[static_cast<std::size_t>(c)] = j;
    }
  }

  blocks_.resize(static_cast<std::size_t>(p));
  for (int i = 0; i < side_; ++i) {
    const Index r0 = block_bounds_[static_cast<std::size_t>(i)];
    const Index r1 = block_bounds_[static_cast<std::size_t>(i) + 1];
    for (int j = 0; j < side_; ++j) {
      CsrBlock& blk = blocks_[static_cast<std::size_t>(i * side_ + j)];
      blk.rows = r1 - r0;
      blk.cols = block_bounds_[static_cast<std::size_t>(j) + 1] - block_bounds_[static_cast<std::size_t>(j)];
      blk.row_offset = r0;
      blk.col_offset = block_bounds_[static_cast<std::size_t>(j)];
      blk.row_ptr.assign(static_cast<std::size_t>(blk.rows) + 1, 0);
    }
    for (Index r = r0; r < r1; ++r) {
      for (Index e = a.row_ptr[static_cast<std::size_t>(r)]; e < a.row_ptr[static_cast<std::size_t>(r) + 1]; ++e) {
        const Index c = a.col_idx[static_cast<std::size_t>(e)];
        CsrBlock& blk = blocks_[static_cast<std::size_t>(i * side_ + col_block[static_cast<std::size_t>(c)])];
        blk.col_idx.push_back(c - blk.col_offset);
        blk.values.push_back(a.values[static_cast<std::size_t>(e)]);
      }
      for (int j = 0; j < side_; ++j) {
        CsrBlock& blk = blocks_[static_cast<std::size_t>(i * side_ + j)];
        blk.row_ptr[static_cast<std::size_t>(r - r0) + 1] = static_cast<Index>(blk.col_idx.size());
      }
    }
  }
}

DistributedPanel scatter(const ProcessGrid& grid, const FeatureMatrix& x) {
  if (x.rows() != grid.n()) throw DimensionError("panel rows do not match the grid");
  DistributedPanel out;
  out.cols = x.cols();
  out.layout = PanelLayout::kX;
  out.blocks.reserve(static_cast<std::size_t>(grid.p()));
  const auto bounds = grid.panel_bounds();
  for (int b = 0; b < grid.p(); ++b) {
    out.blocks.push_back(x.middleRows(bounds[static_cast<std::size_t>(b)], grid.panel_rows(b)));
  }
  return out;
}

FeatureMatrix gather(const ProcessGrid& grid, const DistributedPanel& panel) {
  if (static_cast<int>(panel.blocks.size()) != grid.p()) throw DimensionError("panel block count mismatch");
  FeatureMatrix x(grid.n(), panel.cols);
  const auto bounds = grid.panel_bounds();
  for (int b = 0; b < grid.p(); ++b) {
    x.middleRows(bounds[static_cast<std::size_t>(b)], grid.panel_rows(b)) =
        panel.blocks[static_cast<std::size_t>(b)];
  }
  return x;
}

PartitionedProblem partition_1p5d(const SparseSym& a, const FeatureMatrix& x, int p) {
  ProcessGrid grid(a, p);
  DistributedPanel panel = scatter(grid, x);
  return PartitionedProblem{std::move(grid), std::move(panel)};
}

DistributedPanel spmm_1p5d(const ProcessGrid& grid, const DistributedPanel& x, CommLedger& ledger,
                           bool redistribute, FlopTally* flops) {
  if (x.layout != PanelLayout::kX) throw ArgumentError("spmm_1p5d expects a panel in the X layout");
  if (static_cast<int>(x.blocks.size()) != grid.p()) throw DimensionError("panel block count mismatch");
  const int side = grid.side();
  const Index k = x.cols;
  const auto bb = grid.block_bounds();
  const auto pb = grid.panel_bounds();

  // Allgather along each grid column: column j assembles X over A block column j.
  std::vector<FeatureMatrix> gathered(static_cast<std::size_t>(side));
  for (int j = 0; j < side; ++j) {
    const Index r0 = bb[static_cast<std::size_t>(j)];
    FeatureMatrix& g = gathered[static_cast<std::size_t>(j)];
    g.resize(bb[static_cast<std::size_t>(j) + 1] - r0, k);
    for (int l = 0; l < side; ++l) {
      const int b = j * side + l;
      g.middleRows(pb[static_cast<std::size_t>(b)] - r0, grid.panel_rows(b)) = x.blocks[static_cast<std::size_t>(b)];
    }
  }

  // Local multiplies.
  std::vector<FeatureMatrix> partial(static_cast<std::size_t>(grid.p()));
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const CsrBlock& blk = grid.a_block(i, j);
      local_spmm(blk, gathered[static_cast<std::size_t>(j)], partial[static_cast<std::size_t>(i * side + j)]);
      if (flops) flops->spmm += static_cast<std::uint64_t>(2 * blk.nnz() * k);
    }
  }

  // Reduce-scatter along each grid row, summing contributions in column order.
  DistributedPanel y;
  y.cols = k;
  y.layout = PanelLayout::kY;
  y.blocks.resize(static_cast<std::size_t>(grid.p()));
  for (int i = 0; i < side; ++i) {
    const Index r0 = bb[static_cast<std::size_t>(i)];
    for (int j = 0; j < side; ++j) {
      const int b = i * side + j;
      const Index off = pb[static_cast<std::size_t>(b)] - r0;
      const Index rows = grid.panel_rows(b);
      FeatureMatrix acc = partial[static_cast<std::size_t>(i * side)].middleRows(off, rows);
      for (int l = 1; l < side; ++l) acc += partial[static_cast<std::size_t>(i * side + l)].middleRows(off, rows);
      y.blocks[static_cast<std::size_t>(b)] = std::move(acc);
    }
  }

  const double lg = log2p(grid.p());
  const double words = static_cast<double>(grid.n()) * static_cast<double>(k) / side;
  ledger.allgather += tally(lg, words);
  ledger.reduce_scatter += tally(lg, words);
  if (redistribute) {
    // Block b moves from y_owner(b) to x_owner(b); same contents, new owner.
    ledger.redistribute += tally(2.0 * lg, 2.0 * words);
    y.layout = PanelLayout::kX;
  }
  return y;
}

FeatureMatrix spmm_1p5d(const ProcessGrid& grid, const FeatureMatrix& x, CommLedger& ledger,
                        bool redistribute, FlopTally* flops) {
  return gather(grid, spmm_1p5d(grid, scatter(grid, x), ledger, redistribute, flops));
}

std::pair<double, double> allreduce_cost(double n_words, int p) {
  if (p < 1) throw ArgumentError("process count must be positive");
  const double lg = log2p(p);
  return {2.0 * lg, 2.0 * n_words * lg};
}

CostPrediction predict_iteration_cost(Method method, Index nnz, Index n, Index k, int p) {
  if (p < 1 || n < 1 || k < 1 || nnz < 0) throw ArgumentError("cost model needs positive sizes");
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(k);
  const double dp = static_cast<double>(p);
  const double lg = log2p(p);
  const double nk = dn * dk;
  const bool f1 = is_f1_family(method);
  CostPrediction c;
  c.flops = (4.0 * dk * static_cast<double>(nnz) + (f1 ? 12.0 : 16.0) * nk * dk + (f1 ? 12.0 : 14.0) * nk) / dp;
  c.comm_alpha_terms = (f1 ? 20.0 : 22.0) * lg;
  c.comm_beta_words = 8.0 * nk / std::sqrt(dp) + (f1 ? 10.0 : 12.0) * nk * lg / dp;
  return c;
}

double load_imbalance(const ProcessGrid& grid) {
  if (grid.nnz() == 0) throw ArgumentError("load imbalance undefined for an operator without nonzeros");
  Index most = 0;
  for (int i = 0; i < grid.side(); ++i) {
    for (int j = 0; j < grid.side(); ++j) most = std::max(most, grid.a_block(i, j).nnz());
  }
  return static_cast<double>(grid.p()) * static_cast<double>(most) / static_cast<double>(grid.nnz());
}

FeatureMatrix SimulatedBackend::spmm(const FeatureMatrix& x) {
  panel_cols_ = x.cols();
  return spmm_1p5d(grid_, x, ledger_, true, &flops_);
}

SmallMatrix SimulatedBackend::gram(const FeatureMatrix& a, const FeatureMatrix& b) {
  const auto pb = grid_.panel_bounds();
  const int side = grid_.side();
  SmallMatrix sum = SmallMatrix::Zero(a.cols(), b.cols());
  for (int pid = 0; pid < grid_.p(); ++pid) {
    const int blk = grid_.x_block_of({pid / side, pid % side});
    const Index r0 = pb[static_cast<std::size_t>(blk)];
    const Index rows = grid_.panel_rows(blk);
    sum.noalias() += a.middleRows(r0, rows).transpose() * b.middleRows(r0, rows);
    flops_.gram += static_cast<std::uint64_t>(2 * rows * a.cols() * b.cols());
  }
  const double words = static_cast<double>(grid_.n()) * static_cast<double>(a.cols()) / grid_.p();
  auto [lat, w] = allreduce_cost(words, grid_.p());
  ledger_.allreduce += tally(lat, w);
  return sum;
}

FeatureMatrix SimulatedBackend::mul_small(const FeatureMatrix& panel, const SmallMatrix& m) {
  const auto pb = grid_.panel_bounds();
  FeatureMatrix out(panel.rows(), m.cols());
  for (int b = 0; b < grid_.p(); ++b) {
    const Index r0 = pb[static_cast<std::size_t>(b)];
    const Index rows = grid_.panel_rows(b);
    out.middleRows(r0, rows).noalias() = panel.middleRows(r0, rows) * m;
  }
  flops_.panel_small += static_cast<std::uint64_t>(2 * panel.rows() * panel.cols() * m.cols());
  return out;
}

std::vector<double> SimulatedBackend::column_dots(std::span<const PanelPair> pairs) {
  const auto pb = grid_.panel_bounds();
  const int side = grid_.side();
  std::vector<double> out;
  for (const auto& [a, b] : pairs) {
    for (Index c = 0; c < a->cols(); ++c) {
      double sum = 0.0;
      for (int pid = 0; pid < grid_.p(); ++pid) {
        const int blk = grid_.x_block_of({pid / side, pid % side});
        const Index r0 = pb[static_cast<std::size_t>(blk)];
        const Index rows = grid_.panel_rows(blk);
        sum += a->col(c).segment(r0, rows).dot(b->col(c).segment(r0, rows));
      }
      out.push_back(sum);
    }
  }
  auto [lat, w] = allreduce_cost(static_cast<double>(out.size()), grid_.p());
  ledger_.allreduce_scalar += tally(lat, w);
  return out;
}

void SimulatedBackend::phase_done(Method method, IterationPhase phase) {
  const double entries = static_cast<double>(grid_.n()) * static_cast<double>(panel_cols_);
  flops_.elementwise += static_cast<std::uint64_t>(elementwise_rate(method, phase) * entries);
}

IterationCost measure_iteration_cost(Method method, const SparseSym& a, Index k, int p, std::uint64_t seed) {
  ProcessGrid grid(a, p);
  SimulatedBackend backend(grid);
  OFMOptions opts;
  opts.k = k;
  opts.max_iters = 1000;
  opts.grad_tol = 0.0;
  opts.abs_tol = 0.0;
  OFMSolver solver(method, a, opts, backend);
  if (!solver.start(random_start(a.n, k, seed))) {
    throw DegenerateError("starting point is already stationary");
  }
  backend.reset();
  solver.step();
  IterationCost cost;
  cost.ledger = backend.ledger();
  cost.flops = backend.flops();
  cost.p = p;
  return cost;
}

void write_cost_csv(std::ostream& out, std::span<const CostRow> rows) {
  const auto old = out.precision(17);
  out << "method,N,k,p,flops,alpha_terms,beta_words\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << r.n << ',' << r.k << ',' << r.p << ',' << r.cost.flops << ','
        << r.cost.comm_alpha_terms << ',' << r.cost.comm_beta_words << '\n';
  }
  out.precision(old);
}

}  // namespace ofm
