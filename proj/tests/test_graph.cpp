#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ofm/eig_oracle.hpp"
#include "ofm/errors.hpp"
#include "ofm/graph.hpp"
#include "support/oracles.hpp"

using namespace ofm;

namespace {

Graph read(const std::string& text, std::optional<std::size_t> hint = std::nullopt) {
  std::istringstream in(text);
  return load_edge_list(in, hint);
}

std::set<Edge> edge_set(const std::vector<Edge>& e) { return {e.begin(), e.end()}; }

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("edge list basics") {
  Graph g = read("0 1\n1 2");
  CHECK(g.n_nodes == 3);
  CHECK(g.edges == std::vector<Edge>{{0, 1}, {1, 2}});

  Graph d = read("0 1\n1 0\n1 1");
  CHECK(d.n_nodes == 2);
  CHECK(d.edges == std::vector<Edge>{{0, 1}});

  CHECK_THROWS_AS(read("0 5", 3), RangeError);
}

TEST_CASE("edge list comments and errors") {
  Graph g = read("% header\n# another\n\n3 1\n");
  CHECK(g.n_nodes == 4);
  CHECK(g.edges == std::vector<Edge>{{1, 3}});
  CHECK(read("0 1", 10).n_nodes == 10);

  try {
    read("0 1\n2 x\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(read("0 -1\n"), ParseError);
  CHECK_THROWS_AS(read("7\n"), ParseError);
}

TEST_CASE("matrix market reader") {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n4 4 3\n2 1\n3 2\n4 4\n");
  Graph g = load_matrix_market(in);
  CHECK(g.n_nodes == 4);
  CHECK(g.edges == std::vector<Edge>{{0, 1}, {1, 2}});

  std::istringstream bad("%%MatrixMarket matrix array real general\n2 2\n");
  CHECK_THROWS(load_matrix_market(bad));
}

TEST_CASE("edge list round trip") {
  Graph g = testing::random_graph(30, 0.2, 4);
  std::ostringstream out;
  write_edge_list(out, g);
  Graph h = read(out.str(), g.n_nodes);
  CHECK(h.n_nodes == g.n_nodes);
  CHECK(h.edges == g.edges);
}

TEST_CASE("shifted operator small cases") {
  Graph one = make_graph(2, {{0, 1}});
  SparseSym a = build_shifted_operator(one);
  Eigen::Matrix2d expect;
  expect << -1, -1, -1, -1;
  CHECK((a.to_dense() - expect).norm() == 0.0);
  auto ev = jacobi_eig(a.to_dense());
  CHECK(ev.values(0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::abs(ev.values(1)) < 1e-12);

  Graph path = make_graph(3, {{0, 1}, {1, 2}});
  SparseSym p = build_shifted_operator(path);
  CHECK(p.coeff(0, 1) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(p.coeff(1, 2) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(p.coeff(0, 2) == 0.0);
  auto pv = jacobi_eig(p.to_dense());
  CHECK(pv.values(0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(pv.values(1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(pv.values(2)) < 1e-12);
}

TEST_CASE("isolated node keeps only the diagonal") {
  Graph g = make_graph(4, {{0, 1}, {1, 2}});
  SparseSym a = build_shifted_operator(g);
  const Index row = 3;
  CHECK(a.row_ptr[row + 1] - a.row_ptr[row] == 1);
  CHECK(a.col_idx[static_cast<std::size_t>(a.row_ptr[row])] == 3);
  CHECK(a.values[static_cast<std::size_t>(a.row_ptr[row])] == -1.0);
}

TEST_CASE("shifted operator matches the dense definition and is symmetric") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph g = testing::random_graph(40, 0.1, seed);
    SparseSym a = build_shifted_operator(g);
    Eigen::MatrixXd d = a.to_dense();
    CHECK((d - testing::dense_shifted(g)).norm() < 1e-14);
    CHECK((d - d.transpose()).norm() == 0.0);
    for (Index r = 0; r < a.n; ++r) {
      CHECK(std::is_sorted(a.col_idx.begin() + a.row_ptr[r], a.col_idx.begin() + a.row_ptr[r + 1]));
    }
    Eigen::VectorXd ev = testing::reference_eigenvalues(d);
    CHECK(ev.minCoeff() >= -2.0 - 1e-9);
    CHECK(ev.maxCoeff() <= 1e-9);
  }
}

TEST_CASE("identity_minus") {
  Graph g = testing::random_graph(20, 0.3, 1);
  SparseSym a = build_shifted_operator(g);
  SparseSym b = identity_minus(a);
  CHECK((b.to_dense() - (Eigen::MatrixXd::Identity(20, 20) - a.to_dense())).norm() == 0.0);
}

TEST_CASE("sbm degenerate probabilities give cliques") {
  auto [g, truth] = generate_sbm({8, 2, 1.0, 0.0, 1.0, 5});
  CHECK(g.n_nodes == 8);
  CHECK(g.n_edges() == 12);
  CHECK(truth.labels == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(truth.n_blocks == 2);
  for (const Edge& e : g.edges) CHECK(truth.labels[e.u] == truth.labels[e.v]);

  auto [g2, t2] = generate_sbm({8, 2, 1.0, 0.0, 1.0, 5});
  CHECK(g2.edges == g.edges);
  CHECK_THROWS_AS(generate_sbm({3, 4, 0.5, 0.1, 1.0, 0}), ArgumentError);
}

TEST_CASE("sbm edge count is binomial") {
  SbmParams p{1000, 4, 0.05, 0.002, 1.0, 17};
  auto [g, truth] = generate_sbm(p);
  std::vector<double> sizes(4, 0.0);
  for (int l : truth.labels) sizes[static_cast<std::size_t>(l)] += 1;
  double pairs_in = 0, pairs_all = 1000.0 * 999.0 / 2.0;
  for (double s : sizes) pairs_in += s * (s - 1) / 2;
  const double pairs_out = pairs_all - pairs_in;
  const double mean = pairs_in * 0.05 + pairs_out * 0.002;
  const double var = pairs_in * 0.05 * 0.95 + pairs_out * 0.002 * 0.998;
  CHECK(std::abs(static_cast<double>(g.n_edges()) - mean) < 4.0 * std::sqrt(var));
}

TEST_CASE("sbm size variation bound") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SbmParams p{300, 5, 0.1, 0.01, 2.0, seed};
    auto sizes = sbm_block_sizes(p);
    CHECK(sizes.size() == 5);
    std::size_t total = 0;
    for (auto s : sizes) total += s;
    CHECK(total == 300);
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*lo > 0);
    CHECK(static_cast<double>(*hi) / static_cast<double>(*lo) <= 2.0);
  }
  auto eq = sbm_block_sizes({10, 3, 0.5, 0.1, 1.0, 0});
  std::sort(eq.begin(), eq.end());
  CHECK(eq == std::vector<std::size_t>{3, 3, 4});
}

TEST_CASE("edge sampling stream") {
  // 15 nodes, 105 edges.
  Graph g = make_graph(15, {});
  std::vector<std::pair<NodeId, NodeId>> all;
  for (NodeId i = 0; i < 15; ++i) {
    for (NodeId j = i + 1; j < 15; ++j) all.emplace_back(i, j);
  }
  g = make_graph(15, all);
  REQUIRE(g.n_edges() == 105);
  StreamPlan plan = split_stream(g, 10, StreamMode::kEdgeSampling, 3);
  REQUIRE(plan.parts.size() == 10);
  std::set<Edge> seen;
  for (const auto& part : plan.parts) {
    CHECK((part.size() == 10 || part.size() == 11));
    for (const Edge& e : part) CHECK(seen.insert(e).second);
  }
  CHECK(seen == edge_set(g.edges));

  StreamPlan single = split_stream(g, 1, StreamMode::kEdgeSampling, 3);
  CHECK(edge_set(single.parts.at(0)) == edge_set(g.edges));
  CHECK_THROWS_AS(split_stream(g, 106, StreamMode::kEdgeSampling, 0), ArgumentError);

  Graph prefix = stream_prefix(plan, g.n_nodes, 9);
  CHECK(prefix.edges == g.edges);
  CHECK(stream_prefix(plan, g.n_nodes, 0).n_edges() == plan.parts[0].size());
}

TEST_CASE("snowball stream on two cliques") {
  // Clique 1 on nodes 0..5, clique 2 on nodes 6..11, no edges between.
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 0; i < 6; ++i) {
    for (NodeId j = i + 1; j < 6; ++j) {
      pairs.emplace_back(i, j);
      pairs.emplace_back(i + 6, j + 6);
    }
  }
  Graph g = make_graph(12, pairs);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    StreamPlan plan = split_stream(g, 4, StreamMode::kSnowball, seed);
    REQUIRE(plan.parts.size() == 4);
    // Which clique the BFS started in: the one whose edges show up first.
    const bool first_is_low = plan.parts[0].front().u < 6;
    auto in_start = [&](const Edge& e) { return (e.u < 6) == first_is_low; };
    std::size_t first_other = plan.parts.size();
    std::size_t last_start = 0;
    std::set<Edge> seen;
    for (std::size_t p = 0; p < plan.parts.size(); ++p) {
      for (const Edge& e : plan.parts[p]) {
        CHECK(seen.insert(e).second);
        if (in_start(e)) last_start = std::max(last_start, p);
        else first_other = std::min(first_other, p);
      }
    }
    CHECK(seen == edge_set(g.edges));
    // The unreached clique lands in the final part, after every part that
    // carried the starting clique except possibly the last.
    CHECK(first_other == plan.parts.size() - 1);
    for (std::size_t p = 0; p + 1 < plan.parts.size(); ++p) {
      for (const Edge& e : plan.parts[p]) CHECK(in_start(e));
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("stream invariants on random graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph g = testing::random_graph(40, 0.1, seed + 100);
    for (StreamMode mode : {StreamMode::kEdgeSampling, StreamMode::kSnowball}) {
      StreamPlan plan = split_stream(g, 5, mode, seed);
      CHECK(plan.parts.size() == 5);
      std::multiset<Edge> seen;
      for (const auto& part : plan.parts) seen.insert(part.begin(), part.end());
      CHECK(seen.size() == g.n_edges());
      CHECK(std::set<Edge>(seen.begin(), seen.end()) == edge_set(g.edges));
    }
  }
}

}  // TEST_SUITE
