#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sigaug/sparse.hpp"

namespace sigaug {

using NodeId = std::uint32_t;

enum class Sign : std::int8_t { Negative = -1, Positive = 1 };

constexpr int to_int(Sign s) noexcept { return static_cast<int>(s); }
constexpr Sign flip(Sign s) noexcept { return s == Sign::Positive ? Sign::Negative : Sign::Positive; }

// An undirected signed edge. Stored with u < v inside a SignedGraph.
struct SignedEdge {
  NodeId u = 0;
  NodeId v = 0;
  Sign sign = Sign::Positive;

  friend bool operator==(const SignedEdge&, const SignedEdge&) = default;
};

// Immutable undirected signed graph. Edges are kept sorted by (u, v) and
// neighbours are indexed per sign for O(deg) lookup.
class SignedGraph {
 public:
  SignedGraph() = default;

  // Throws ArgumentError on out-of-range ids, self-loops or duplicate pairs.
  SignedGraph(std::size_t num_nodes, std::vector<SignedEdge> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_positive() const noexcept { return num_positive_; }
  std::size_t num_negative() const noexcept { return edges_.size() - num_positive_; }

  std::span<const SignedEdge> edges() const noexcept { return edges_; }

  std::span<const NodeId> neighbors(NodeId node, Sign sign) const;
  std::size_t degree(NodeId node) const;

  std::optional<Sign> sign_of(NodeId a, NodeId b) const;
  bool has_edge(NodeId a, NodeId b) const { return sign_of(a, b).has_value(); }

  friend bool operator==(const SignedGraph& a, const SignedGraph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t num_nodes_ = 0;
  std::size_t num_positive_ = 0;
  std::vector<SignedEdge> edges_;
  // CSR per sign: offsets has num_nodes + 1 entries.
  std::vector<std::size_t> pos_offsets_, neg_offsets_;
  std::vector<NodeId> pos_adj_, neg_adj_;
};

struct RatingRecord {
  std::string source;
  std::string target;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;
};

enum class EdgeFormat { Rating, Signed };

enum class ConflictPolicy { NegativeWins, LastWins, Majority };

// Reads "source target weight [timestamp]" lines separated by commas and/or
// whitespace. Lines starting with '#' or '%' and blank lines are skipped.
// Throws ParseError carrying the 1-based line number.
std::vector<RatingRecord> load_edge_list(std::istream& in, EdgeFormat format);
std::vector<RatingRecord> load_edge_list_file(const std::string& path, EdgeFormat format);

struct LabeledGraph {
  SignedGraph graph;
  std::vector<std::string> labels;  // labels[id] is the original node label
};

// Labels get dense ids in first-appearance order; rating > 0 is positive,
// everything else negative. Directed duplicates over one unordered pair are
// collapsed according to `policy`. Self-loops are dropped.
LabeledGraph build_labeled_graph(std::span<const RatingRecord> records,
                                 ConflictPolicy policy = ConflictPolicy::NegativeWins);
SignedGraph build_graph(std::span<const RatingRecord> records,
                        ConflictPolicy policy = ConflictPolicy::NegativeWins);

struct EdgeSplit {
  SignedGraph train;
  std::vector<SignedEdge> test;
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
};

EdgeSplit split_edges(const SignedGraph& g, double test_fraction, std::uint64_t seed);

// Seeded uniform edge subsample keeping all nodes.
SignedGraph subsample_edges(const SignedGraph& g, double keep_fraction, std::uint64_t seed);

// Apos / Aneg as symmetric 0/1 matrices.
std::pair<CsrMatrix, CsrMatrix> split_adjacency(const SignedGraph& g);

// Signed adjacency matrix with entries in {-1, 0, 1}.
CsrMatrix signed_adjacency(const SignedGraph& g);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t pos_edges = 0;
  std::size_t neg_edges = 0;
  double neg_ratio = 0.0;
};

GraphStats graph_stats(const SignedGraph& g);

// Counts over raw directed records: distinct labels and every record by sign.
GraphStats record_stats(std::span<const RatingRecord> records);

// Writes `u v sign` lines using dense ids; readable back with EdgeFormat::Signed.
void write_signed_edge_list(std::ostream& out, const SignedGraph& g);

}  // namespace sigaug
