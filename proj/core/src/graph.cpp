#include "ofm/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <string>

#include "ofm/errors.hpp"

namespace ofm {

namespace {

bool is_comment_or_blank(const std::string& line) {
  auto it = std::find_if_not(line.begin(), line.end(),
                             [](unsigned char c) { return std::isspace(c); });
  return it == line.end() || *it == '%' || *it == '#';
}

std::optional<std::uint64_t> parse_uint(std::string_view token) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Number of failures before the next success of a Bernoulli(p) stream.
std::uint64_t geometric_skip(std::mt19937_64& rng, double p) {
  if (p >= 1.0) return 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  double skip = std::floor(std::log(u) / std::log1p(-p));
  if (skip > 1e18) return std::numeric_limits<std::uint64_t>::max() / 2;
  return static_cast<std::uint64_t>(skip);
}

}  // namespace

Graph make_graph(std::size_t n_nodes, std::vector<std::pair<NodeId, NodeId>> pairs) {
  Graph g;
  g.n_nodes = n_nodes;
  g.edges.reserve(pairs.size());
  for (auto [a, b] : pairs) {
    if (a >= n_nodes || b >= n_nodes) {
      throw RangeError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                       ") has an endpoint outside [0, " + std::to_string(n_nodes) + ")");
    }
    if (a == b) continue;
    g.edges.push_back(Edge{std::min(a, b), std::max(a, b)});
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

Graph load_edge_list(std::istream& in, std::optional<std::size_t> n_hint) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::uint64_t max_id = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    auto tokens = split_ws(line);
    if (tokens.size() < 2) throw ParseError("expected two node ids", line_no);
    auto a = parse_uint(tokens[0]);
    auto b = parse_uint(tokens[1]);
    if (!a || !b) throw ParseError("node ids must be non-negative integers", line_no);
    if (*a > std::numeric_limits<NodeId>::max() - 1 ||
        *b > std::numeric_limits<NodeId>::max() - 1) {
      throw RangeError("node id too large at line " + std::to_string(line_no));
    }
    if (n_hint && (*a >= *n_hint || *b >= *n_hint)) {
      throw RangeError("endpoint >= node count " + std::to_string(*n_hint) + " at line " +
                       std::to_string(line_no));
    }
    max_id = std::max({max_id, *a, *b});
    any = true;
    pairs.emplace_back(static_cast<NodeId>(*a), static_cast<NodeId>(*b));
  }
  if (in.bad()) throw IoError("failed reading edge list");
  std::size_t n = n_hint ? *n_hint : (any ? static_cast<std::size_t>(max_id) + 1 : 0);
  return make_graph(n, std::move(pairs));
}

Graph load_matrix_market(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty MatrixMarket stream", 1);
  ++line_no;
  std::string lower = line;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower.rfind("%%matrixmarket", 0) != 0) throw ParseError("missing MatrixMarket banner", 1);
  if (lower.find("coordinate") == std::string::npos) {
    throw ParseError("only coordinate MatrixMarket files are supported", 1);
  }
  if (lower.find("general") == std::string::npos && lower.find("symmetric") == std::string::npos) {
    throw ParseError("expected a general or symmetric MatrixMarket header", 1);
  }

  std::uint64_t rows = 0, cols = 0, entries = 0;
  bool have_size = false;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    auto tokens = split_ws(line);
    if (!have_size) {
      if (tokens.size() < 3) throw ParseError("expected 'rows cols entries'", line_no);
      auto r = parse_uint(tokens[0]);
      auto c = parse_uint(tokens[1]);
      auto e = parse_uint(tokens[2]);
      if (!r || !c || !e) throw ParseError("malformed size line", line_no);
      rows = *r;
      cols = *c;
      entries = *e;
      if (rows != cols) throw ParseError("adjacency matrix must be square", line_no);
      have_size = true;
      pairs.reserve(entries);
      continue;
    }
    if (tokens.size() < 2) throw ParseError("expected 'row col [value]'", line_no);
    auto a = parse_uint(tokens[0]);
    auto b = parse_uint(tokens[1]);
    if (!a || !b || *a == 0 || *b == 0) {
      throw ParseError("MatrixMarket indices are positive integers", line_no);
    }
    if (*a > rows || *b > cols) throw RangeError("entry outside matrix at line " + std::to_string(line_no));
    pairs.emplace_back(static_cast<NodeId>(*a - 1), static_cast<NodeId>(*b - 1));
  }
  if (!have_size) throw ParseError("missing size line", line_no);
  return make_graph(static_cast<std::size_t>(rows), std::move(pairs));
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# nodes " << g.n_nodes << " edges " << g.edges.size() << '\n';
  for (const auto& e : g.edges) out << e.u << '\t' << e.v << '\n';
}

std::vector<std::size_t> degrees(const Graph& g) {
  std::vector<std::size_t> deg(g.n_nodes, 0);
  for (const auto& e : g.edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

double SparseSym::frobenius_norm_squared() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

double SparseSym::frobenius_norm() const { return std::sqrt(frobenius_norm_squared()); }

Eigen::MatrixXd SparseSym::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d(i, col_idx[p]) = values[p];
  }
  return d;
}

double SparseSym::coeff(Index i, Index j) const {
  auto first = col_idx.begin() + row_ptr[i];
  auto last = col_idx.begin() + row_ptr[i + 1];
  auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

SparseSym build_shifted_operator(const Graph& g) {
  const auto n = static_cast<Index>(g.n_nodes);
  auto deg = degrees(g);
  std::vector<double> inv_sqrt(g.n_nodes, 0.0);
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    if (deg[i] > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(deg[i]));
  }

  // Adjacency lists come out sorted because edges are sorted by (u, v) and we
  // insert the diagonal in place.
  std::vector<std::vector<NodeId>> adj(g.n_nodes);
  for (const auto& e : g.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }

  SparseSym a;
  a.n = n;
  a.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  a.col_idx.reserve(g.n_nodes + 2 * g.edges.size());
  a.values.reserve(g.n_nodes + 2 * g.edges.size());
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    bool diag_done = false;
    for (NodeId j : row) {
      if (!diag_done && j > i) {
        a.col_idx.push_back(static_cast<Index>(i));
        a.values.push_back(-1.0);
        diag_done = true;
      }
      a.col_idx.push_back(static_cast<Index>(j));
      // Same product in both (i, j) and (j, i) keeps A bitwise symmetric.
      double lo = inv_sqrt[std::min<std::size_t>(i, j)];
      double hi = inv_sqrt[std::max<std::size_t>(i, j)];
      a.values.push_back(-(lo * hi));
    }
    if (!diag_done) {
      a.col_idx.push_back(static_cast<Index>(i));
      a.values.push_back(-1.0);
    }
    a.row_ptr[i + 1] = static_cast<Index>(a.col_idx.size());
  }
  return a;
}

SparseSym identity_minus(const SparseSym& a) {
  SparseSym b;
  b.n = a.n;
  b.row_ptr.assign(static_cast<std::size_t>(a.n) + 1, 0);
  for (Index i = 0; i < a.n; ++i) {
    bool diag_done = false;
    for (Index p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      Index j = a.col_idx[p];
      if (!diag_done && j > i) {
        b.col_idx.push_back(i);
        b.values.push_back(1.0);
        diag_done = true;
      }
      b.col_idx.push_back(j);
      b.values.push_back(j == i ? 1.0 - a.values[p] : -a.values[p]);
      if (j == i) diag_done = true;
    }
    if (!diag_done) {
      b.col_idx.push_back(i);
      b.values.push_back(1.0);
    }
    b.row_ptr[i + 1] = static_cast<Index>(b.col_idx.size());
  }
  return b;
}

std::vector<std::size_t> sbm_block_sizes(const SbmParams& params) {
  const std::size_t n = params.n;
  const std::size_t blocks = params.blocks;
  if (blocks == 0 || blocks > n) {
    throw ArgumentError("block count must be in [1, n]");
  }
  if (params.size_variation < 1.0) throw ArgumentError("size_variation must be >= 1");

  std::vector<std::size_t> equal(blocks, n / blocks);
  for (std::size_t b = 0; b < n % blocks; ++b) ++equal[b];
  if (params.size_variation == 1.0) return equal;

  // Weights uniform in [1, variation]; sizes by largest remainder. Rounding can
  // push the ratio over the bound, in which case we redraw.
  std::mt19937_64 rng(params.seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> weight(1.0, params.size_variation);
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<double> w(blocks);
    for (auto& x : w) x = weight(rng);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<std::size_t> sizes(blocks);
    std::vector<std::pair<double, std::size_t>> frac(blocks);
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
      double exact = static_cast<double>(n) * w[b] / total;
      sizes[b] = static_cast<std::size_t>(std::floor(exact));
      frac[b] = {exact - std::floor(exact), b};
      assigned += sizes[b];
    }
    std::sort(frac.begin(), frac.end(), [](auto& x, auto& y) {
      return x.first > y.first || (x.first == y.first && x.second < y.second);
    });
    for (std::size_t r = 0; r < n - assigned; ++r) ++sizes[frac[r].second];
    auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    if (*mn > 0 && static_cast<double>(*mx) <= params.size_variation * static_cast<double>(*mn)) {
      return sizes;
    }
  }
  return equal;
}

std::pair<Graph, GroundTruth> generate_sbm(const SbmParams& params) {
  if (params.blocks > params.n) throw ArgumentError("more blocks than nodes");
  if (!(params.p_out >= 0.0 && params.p_out <= params.p_in && params.p_in <= 1.0)) {
    throw ArgumentError("SBM probabilities must satisfy 0 <= p_out <= p_in <= 1");
  }
  auto sizes = sbm_block_sizes(params);
  std::vector<std::size_t> start(sizes.size() + 1, 0);
  for (std::size_t b = 0; b < sizes.size(); ++b) start[b + 1] = start[b] + sizes[b];

  GroundTruth truth;
  truth.n_blocks = static_cast<int>(sizes.size());
  truth.labels.resize(params.n);
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (std::size_t u = start[b]; u < start[b + 1]; ++u) truth.labels[u] = static_cast<int>(b);
  }

  std::mt19937_64 rng(params.seed);
  Graph g;
  g.n_nodes = params.n;
  for (std::size_t u = 0; u < params.n; ++u) {
    const auto bu = static_cast<std::size_t>(truth.labels[u]);
    for (std::size_t bv = bu; bv < sizes.size(); ++bv) {
      const double p = bv == bu ? params.p_in : params.p_out;
      if (p <= 0.0) continue;
      const std::size_t lo = bv == bu ? u + 1 : start[bv];
      const std::size_t hi = start[bv + 1];
      if (lo >= hi) continue;
      const std::uint64_t len = hi - lo;
      std::uint64_t pos = geometric_skip(rng, p);
      while (pos < len) {
        g.edges.push_back(Edge{static_cast<NodeId>(u), static_cast<NodeId>(lo + pos)});
        pos += 1 + geometric_skip(rng, p);
      }
    }
  }
  // Rows are visited in order and targets are increasing, so edges are sorted.
  return {std::move(g), std::move(truth)};
}

StreamPlan split_stream(const Graph& g, std::size_t parts, StreamMode mode,
                        std::uint64_t seed) {
  if (parts == 0) throw ArgumentError("stream needs at least one part");
  if (parts > g.edges.size()) throw ArgumentError("more stream parts than edges");

  StreamPlan plan;
  plan.mode = mode;
  plan.parts.resize(parts);
  std::mt19937_64 rng(seed);

  auto deal = [&](const std::vector<Edge>& ordered, std::size_t n_parts) {
    const std::size_t base = ordered.size() / n_parts;
    const std::size_t extra = ordered.size() % n_parts;
    std::size_t pos = 0;
    for (std::size_t p = 0; p < n_parts; ++p) {
      std::size_t len = base + (p < extra ? 1 : 0);
      plan.parts[p].assign(ordered.begin() + static_cast<std::ptrdiff_t>(pos),
                           ordered.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
  };

  if (mode == StreamMode::kEdgeSampling) {
    std::vector<Edge> shuffled = g.edges;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    deal(shuffled, parts);
    return plan;
  }

  std::vector<std::vector<NodeId>> adj(g.n_nodes);
  for (const auto& e : g.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> order(g.n_nodes, kUnreached);
  std::uniform_int_distribution<std::size_t> pick(0, g.n_nodes - 1);
  // Start from an endpoint of some edge so the seed component is non-trivial.
  std::size_t source = pick(rng);
  if (adj[source].empty()) {
    const auto& e = g.edges[std::uniform_int_distribution<std::size_t>(0, g.edges.size() - 1)(rng)];
    source = e.u;
  }
  std::queue<NodeId> frontier;
  std::size_t next = 0;
  order[source] = next++;
  frontier.push(static_cast<NodeId>(source));
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : adj[u]) {
      if (order[v] == kUnreached) {
        order[v] = next++;
        frontier.push(v);
      }
    }
  }

  std::vector<Edge> reached;
  std::vector<Edge> unreached;
  for (const auto& e : g.edges) {
    (order[e.u] == kUnreached ? unreached : reached).push_back(e);
  }
  std::sort(reached.begin(), reached.end(), [&](const Edge& x, const Edge& y) {
    auto kx = std::minmax(order[x.u], order[x.v]);
    auto ky = std::minmax(order[y.u], order[y.v]);
    return kx < ky;
  });
  deal(reached, parts);
  plan.parts.back().insert(plan.parts.back().end(), unreached.begin(), unreached.end());
  return plan;
}

Graph stream_prefix(const StreamPlan& plan, std::size_t n_nodes, std::size_t stage) {
  if (stage >= plan.parts.size()) throw ArgumentError("stream stage out of range");
  Graph g;
  g.n_nodes = n_nodes;
  for (std::size_t s = 0; s <= stage; ++s) {
    g.edges.insert(g.edges.end(), plan.parts[s].begin(), plan.parts[s].end());
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace ofm
