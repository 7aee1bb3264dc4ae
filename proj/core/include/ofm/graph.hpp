#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ofm/types.hpp"

namespace ofm {

using NodeId = std::uint32_t;

/// Undirected edge stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Simple undirected graph. Edges are sorted, unique, free of self-loops, and
/// every endpoint is below n_nodes.
struct Graph {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges;

  std::size_t n_edges() const { return edges.size(); }
};

/// Normalizes an arbitrary list of node pairs into a Graph: orients each pair
/// as (min, max), drops self-loops and duplicates. Throws RangeError when an
/// endpoint is >= n_nodes.
Graph make_graph(std::size_t n_nodes, std::vector<std::pair<NodeId, NodeId>> pairs);

/// Reads a 0-indexed whitespace separated edge list. Lines starting with '%'
/// or '#' and blank lines are skipped.
///
/// Without n_hint the node count is max endpoint + 1. With n_hint every
/// endpoint must be below it (RangeError otherwise). A malformed line raises
/// ParseError carrying its line number.
Graph load_edge_list(std::istream& in, std::optional<std::size_t> n_hint = std::nullopt);

/// Reads a MatrixMarket "coordinate" matrix (general or symmetric) as an
/// undirected pattern graph. Entries are 1-indexed; values, if present, are
/// ignored.
Graph load_matrix_market(std::istream& in);

void write_edge_list(std::ostream& out, const Graph& g);

std::vector<std::size_t> degrees(const Graph& g);

/// Square symmetric sparse matrix in CSR form.
struct SparseSym {
  Index n = 0;
  std::vector<Index> row_ptr;  // size n + 1
  std::vector<Index> col_idx;  // sorted within each row
  std::vector<double> values;

  Index nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }
  double frobenius_norm_squared() const;
  double frobenius_norm() const;
  Eigen::MatrixXd to_dense() const;

  /// Entry (i, j) or 0 when not stored. Binary search within the row.
  double coeff(Index i, Index j) const;
};

/// Builds A = L - 2I = -I - D^{-1/2} S D^{-1/2} for the unweighted graph.
/// Isolated nodes use D^{-1/2}_ii = 0, so their row holds only the diagonal -1.
/// Every row stores its diagonal entry.
SparseSym build_shifted_operator(const Graph& g);

/// Returns I - A, i.e. D^{-1/2} S D^{-1/2} + 2I when `a` came from
/// build_shifted_operator.
SparseSym identity_minus(const SparseSym& a);

struct GroundTruth {
  std::vector<int> labels;
  int n_blocks = 0;
};

struct SbmParams {
  std::size_t n = 0;
  std::size_t blocks = 1;
  double p_in = 0.0;
  double p_out = 0.0;
  double size_variation = 1.0;  // max/min block size bound, >= 1
  std::uint64_t seed = 0;
};

/// Stochastic block model with contiguous blocks. Pairs inside a block are
/// kept with probability p_in, pairs across blocks with p_out.
std::pair<Graph, GroundTruth> generate_sbm(const SbmParams& params);

/// Block sizes used by generate_sbm for the given parameters.
std::vector<std::size_t> sbm_block_sizes(const SbmParams& params);

enum class StreamMode { kEdgeSampling, kSnowball };

struct StreamPlan {
  std::vector<std::vector<Edge>> parts;
  StreamMode mode = StreamMode::kEdgeSampling;
};

/// Splits the edges of `g` into `parts` disjoint subsets covering all edges.
///
/// Edge sampling shuffles the edges and deals them into parts whose sizes
/// differ by at most one. Snowball runs a BFS from a random node; each edge is
/// ranked by the BFS position of its earlier endpoint and the reached edges
/// are cut into equal-count quantiles. Edges outside the seed's component are
/// appended to the final part.
StreamPlan split_stream(const Graph& g, std::size_t parts, StreamMode mode,
                        std::uint64_t seed);

/// Graph on all g.n_nodes nodes holding the edges of parts [0, stage].
Graph stream_prefix(const StreamPlan& plan, std::size_t n_nodes, std::size_t stage);

}  // namespace ofm
