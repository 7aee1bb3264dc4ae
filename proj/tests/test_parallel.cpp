#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ofm/errors.hpp"
#include "ofm/kernels.hpp"
#include "ofm/parallel.hpp"
#include "support/oracles.hpp"

using namespace ofm;

namespace {

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double s = std::max(a.norm(), b.norm());
  return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

// Band matrix: |i - j| <= w.
SparseSym band(Index n, Index w) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j <= std::min(n - 1, i + w); ++j) {
      pairs.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }
  }
  return build_shifted_operator(make_graph(static_cast<std::size_t>(n), pairs));
}

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("grid ownership follows the 1.5D layout") {
  SparseSym a = build_shifted_operator(testing::random_graph(30, 0.2, 1));
  ProcessGrid grid(a, 9);
  CHECK(grid.side() == 3);
  GridCoord p21{2, 1};
  CHECK(grid.x_block_of(p21) == 5);
  CHECK(grid.y_block_of(p21) == 7);
  CHECK(grid.x_owner(5) == p21);
  CHECK(grid.y_owner(7) == p21);

  std::set<int> xs, ys;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      xs.insert(grid.x_block_of({i, j}));
      ys.insert(grid.y_block_of({i, j}));
    }
  }
  CHECK(xs.size() == 9);
  CHECK(ys.size() == 9);

  CHECK_THROWS_AS(ProcessGrid(a, 8), ArgumentError);
  CHECK_THROWS_AS(partition_1p5d(a, Eigen::MatrixXd::Zero(30, 2), 2), ArgumentError);
  CHECK_THROWS_AS(ProcessGrid(a, 36 * 36), ArgumentError);
}

TEST_CASE("blocks tile A exactly") {
  SparseSym a = build_shifted_operator(testing::random_graph(47, 0.15, 2));
  for (int p : {1, 4, 9, 16}) {
    ProcessGrid grid(a, p);
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(a.n, a.n);
    Index nnz = 0;
    for (int i = 0; i < grid.side(); ++i) {
      for (int j = 0; j < grid.side(); ++j) {
        const CsrBlock& b = grid.a_block(i, j);
        nnz += b.nnz();
        for (Index r = 0; r < b.rows; ++r) {
          for (Index e = b.row_ptr[r]; e < b.row_ptr[r + 1]; ++e) {
            rebuilt(b.row_offset + r, b.col_offset + b.col_idx[e]) += b.values[e];
          }
        }
      }
    }
    CHECK(nnz == a.nnz());
    CHECK((rebuilt - a.to_dense()).norm() == 0.0);

    auto pb = grid.panel_bounds();
    CHECK(pb.front() == 0);
    CHECK(pb.back() == a.n);
    for (std::size_t b = 1; b < pb.size(); ++b) CHECK(pb[b - 1] <= pb[b]);
    // Ceil partition of the A blocks.
    const Index size = (a.n + grid.side() - 1) / grid.side();
    auto bb = grid.block_bounds();
    for (int i = 0; i <= grid.side(); ++i) CHECK(bb[i] == std::min(a.n, size * i));
  }
}

TEST_CASE("scatter and gather are inverse") {
  SparseSym a = build_shifted_operator(testing::random_graph(40, 0.1, 3));
  Eigen::MatrixXd x = testing::random_matrix(40, 3, 1);
  auto prob = partition_1p5d(a, x, 16);
  CHECK(gather(prob.grid, prob.x) == x);
}

TEST_CASE("distributed SpMM equals the serial product") {
  for (int p : {1, 4, 9, 16}) {
    for (Index n : {32, 77, 128}) {
      for (Index k : {1, 4, 8}) {
        SparseSym a = build_shifted_operator(
            testing::random_graph(static_cast<std::size_t>(n), 0.1, static_cast<std::uint64_t>(p * 1000 + n + k)));
        Eigen::MatrixXd x = testing::random_matrix(n, k, static_cast<std::uint64_t>(n * k));
        ProcessGrid grid(a, p);
        CommLedger ledger;
        Eigen::MatrixXd y = spmm_1p5d(grid, x, ledger);
        CHECK(rel(y, spmm_serial(a, x)) < 1e-12);
        CHECK(rel(y, a.to_dense() * x) < 1e-12);
      }
    }
  }
  SparseSym a = build_shifted_operator(testing::random_graph(64, 0.1, 4));
  Eigen::MatrixXd x = testing::random_matrix(64, 4, 2);
  CommLedger ledger;
  CHECK(spmm_1p5d(ProcessGrid(a, 1), x, ledger) == spmm_serial(a, x));
}

TEST_CASE("SpMM communication charges") {
  SparseSym a = build_shifted_operator(testing::random_graph(16, 0.3, 5));
  Eigen::MatrixXd x = testing::random_matrix(16, 2, 1);
  ProcessGrid grid(a, 4);

  CommLedger one;
  DistributedPanel y = spmm_1p5d(grid, scatter(grid, x), one, false);
  CHECK(y.layout == PanelLayout::kY);
  CHECK(one.latency_events() == 4.0);
  CHECK(one.words_moved() == 32.0);
  CHECK(one.allgather.calls == 1);
  CHECK(one.reduce_scatter.calls == 1);
  CHECK(gather(grid, y) == spmm_1p5d(grid, x, one));

  CommLedger full;
  spmm_1p5d(grid, x, full, true);
  CHECK(full.latency_events() == 8.0);
  CHECK(full.words_moved() == 64.0);

  CommLedger two;
  spmm_1p5d(grid, x, two, true);
  spmm_1p5d(grid, x, two, true);
  CHECK(two == full + full);
  CHECK(two.latency_events() == 16.0);

  // A Y-layout panel cannot feed another SpMM directly.
  CommLedger l;
  CHECK_THROWS_AS(spmm_1p5d(grid, y, l), ArgumentError);
}

TEST_CASE("allreduce cost") {
  auto [a1, b1] = allreduce_cost(8, 1);
  CHECK(a1 == 0.0);
  CHECK(b1 == 0.0);
  auto [a4, b4] = allreduce_cost(8, 4);
  CHECK(a4 == 4.0);
  CHECK(b4 == 32.0);
  auto [a16, b16] = allreduce_cost(8, 16);
  CHECK(a16 / a4 == doctest::Approx(std::log2(16.0) / std::log2(4.0)));
  CHECK_THROWS_AS(allreduce_cost(1, 0), ArgumentError);
}

TEST_CASE("cost predictions") {
  CostPrediction c = predict_iteration_cost(Method::kOfmF1, 1000, 100, 4, 4);
  CHECK(c.flops == 10000.0);
  CHECK(c.comm_alpha_terms == 40.0);
  CHECK(c.comm_beta_words == 8.0 * 400 / 2 + 10.0 * 400 * 2 / 4);
  for (auto [x, y] : {std::pair{Method::kOfmF1, Method::kTriOfmF1}, std::pair{Method::kOfmF2, Method::kTriOfmF2}}) {
    CostPrediction px = predict_iteration_cost(x, 5000, 300, 6, 9);
    CostPrediction py = predict_iteration_cost(y, 5000, 300, 6, 9);
    CHECK(px.flops == py.flops);
    CHECK(px.comm_alpha_terms == py.comm_alpha_terms);
    CHECK(px.comm_beta_words == py.comm_beta_words);
  }
  CostPrediction f1 = predict_iteration_cost(Method::kOfmF1, 5000, 300, 6, 9);
  CostPrediction f2 = predict_iteration_cost(Method::kOfmF2, 5000, 300, 6, 9);
  CHECK(f2.flops - f1.flops == doctest::Approx((4.0 * 300 * 36 + 2.0 * 300 * 6) / 9));
  CHECK_THROWS_AS(predict_iteration_cost(Method::kOfmF1, 10, 0, 1, 1), ArgumentError);

  std::ostringstream out;
  std::vector<CostRow> rows = {{Method::kOfmF1, 100, 4, 4, c}};
  write_cost_csv(out, rows);
  CHECK(out.str() == "method,N,k,p,flops,alpha_terms,beta_words\nofm-f1,100,4,4,10000,40,3600\n");
}

TEST_CASE("load imbalance") {
  SparseSym b = band(100, 3);
  ProcessGrid grid(b, 4);
  Index most = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) most = std::max(most, grid.a_block(i, j).nnz());
  }
  const double li = load_imbalance(grid);
  CHECK(li == doctest::Approx(4.0 * most / b.nnz()));
  CHECK(li >= 1.0);
  CHECK(li <= 4.0);

  // Uniform: a complete graph on 4 nodes, one node per block.
  SparseSym full = build_shifted_operator(make_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
  CHECK(load_imbalance(ProcessGrid(full, 16)) == doctest::Approx(1.0));

  // Everything in one block: a graph whose edges all live in the first block.
  SparseSym corner = build_shifted_operator(make_graph(8, {{0, 1}}));
  SparseSym c2 = corner;
  // Keep only the stored (0,0),(0,1),(1,0),(1,1) entries.
  for (Index r = 2; r < 8; ++r) {
    for (Index e = c2.row_ptr[r]; e < c2.row_ptr[r + 1]; ++e) c2.values[e] = 0.0;
  }
  SparseSym trimmed;
  trimmed.n = 8;
  trimmed.row_ptr.assign(9, 0);
  for (Index r = 0; r < 8; ++r) {
    for (Index e = c2.row_ptr[r]; e < c2.row_ptr[r + 1]; ++e) {
      if (c2.values[e] != 0.0) {
        trimmed.col_idx.push_back(c2.col_idx[e]);
        trimmed.values.push_back(c2.values[e]);
      }
    }
    trimmed.row_ptr[r + 1] = static_cast<Index>(trimmed.col_idx.size());
  }
  CHECK(load_imbalance(ProcessGrid(trimmed, 4)) == doctest::Approx(4.0));

  SparseSym empty;
  empty.n = 4;
  empty.row_ptr.assign(5, 0);
  CHECK_THROWS_AS(load_imbalance(ProcessGrid(empty, 4)), ArgumentError);
}

TEST_CASE("simulated iterations follow the serial iterations") {
  SparseSym a = build_shifted_operator(testing::random_graph(90, 0.08, 7));
  for (Method m : kAllMethods) {
    OFMOptions o;
    o.k = 3;
    o.max_iters = 15;
    o.grad_tol = 0.0;
    ProcessGrid grid(a, 9);
    SimulatedBackend dist(grid);
    OFMSolver solver(m, a, o, dist);
    if (solver.start(random_start(a.n, 3, o.seed))) {
      while (solver.step()) {
      }
    }
    OFMResult serial = run_ofm(m, a, o);
    CHECK(rel(solver.x(), serial.x) < 1e-9);
    CHECK(dist.ledger().allgather.calls == 2 * 15);
  }
}

TEST_CASE("one simulated iteration matches the closed forms") {
  for (auto [n, k, p] : {std::tuple{256, 8, 4}, std::tuple{1024, 8, 16}}) {
    auto [g, truth] = generate_sbm({static_cast<std::size_t>(n), 4, 0.05, 0.005, 1.0, 3});
    SparseSym a = build_shifted_operator(g);
    for (Method m : kAllMethods) {
      IterationCost cost = measure_iteration_cost(m, a, k, p, 1);
      CostPrediction pred = predict_iteration_cost(m, a.nnz(), n, k, p);
      CHECK(cost.flops_per_process() == pred.flops);
      // The scalar allreduce counts as a latency event but its O(k) words are
      // left out of the beta term.
      CHECK(cost.ledger.latency_events() == pred.comm_alpha_terms);
      CHECK(cost.ledger.allreduce_scalar.latency_events == 2.0 * std::log2(p));
      CHECK(cost.ledger.panel_words() == pred.comm_beta_words);
      // The packed column sums: (G,G), (G_prev,G) and, for f1, (X,AX).
      const double pairs = is_f1_family(m) ? 3.0 : 2.0;
      CHECK(cost.ledger.allreduce_scalar.words == 2.0 * pairs * k * std::log2(p));
    }
  }
}

}  // TEST_SUITE
