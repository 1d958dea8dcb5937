#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sigaug/graph.hpp"
#include "sigaug/sparse.hpp"

namespace sigaug {

inline constexpr int kDefaultEta = 4;
inline constexpr int kMaxEta = 6;

// Per-length count matrices for closed signed walks through each pair.
//
// balanced(n)(i, j) counts walks of n - 1 edges from i to j whose sign is -1,
// i.e. walks that close into a balanced cycle through a negative edge e_ij;
// unbalanced(n) counts the +1 walks. Lengths run over 3..eta.
struct CycleCountSet {
  int eta = kDefaultEta;
  std::vector<CsrMatrix> cb;  // cb[n - 3]
  std::vector<CsrMatrix> cu;
  std::vector<CsrMatrix> c;

  const CsrMatrix& balanced(int n) const { return cb.at(static_cast<std::size_t>(n - 3)); }
  const CsrMatrix& unbalanced(int n) const { return cu.at(static_cast<std::size_t>(n - 3)); }
  const CsrMatrix& total(int n) const { return c.at(static_cast<std::size_t>(n - 3)); }
};

// Product of the signs along a path; throws ArgumentError on an empty path.
Sign path_sign(std::span<const Sign> signs);

// Matrix recursion:
//   CB(3) = A+ A- + A- A+,          CU(3) = A+^2 + A-^2
//   CB(n) = CB(n-1) A+ + CU(n-1) A-, CU(n) = CB(n-1) A- + CU(n-1) A+
//   C(n)  = CB(n) + CU(n)
CycleCountSet count_cycles(const CsrMatrix& apos, const CsrMatrix& aneg, int eta = kDefaultEta);
CycleCountSet count_cycles(const SignedGraph& g, int eta = kDefaultEta);

inline constexpr std::size_t kOracleMaxNodes = 14;

// Explicit walk enumeration computing the same quantities as count_cycles.
// Refuses graphs with more than kOracleMaxNodes nodes.
CycleCountSet oracle_count_cycles(const SignedGraph& g, int eta = kDefaultEta);

// sum_n CB(n)_uv / sum_n C(n)_uv, or nullopt when no walk closes through (u, v).
std::optional<double> edge_utility(const CycleCountSet& counts, NodeId u, NodeId v);

enum class Verdict { Keep, Discard };

std::string_view to_string(Verdict v);

inline constexpr double kMaxMu = 0.9;

// Keep when the utility reaches mu or is undefined. mu must lie in [0, 0.9].
Verdict filter_edge(std::optional<double> utility, double mu);

// Mutable adjacency used while a graph is being perturbed.
class SignedAdjacencyLists {
 public:
  struct Neighbor {
    NodeId node;
    Sign sign;
  };

  explicit SignedAdjacencyLists(std::size_t num_nodes = 0) : adj_(num_nodes) {}
  explicit SignedAdjacencyLists(const SignedGraph& g);

  std::size_t num_nodes() const noexcept { return adj_.size(); }
  std::span<const Neighbor> neighbors(NodeId node) const { return adj_[node]; }
  std::optional<Sign> sign_of(NodeId a, NodeId b) const;

  // Inserts or overwrites the sign of {a, b}.
  void set(NodeId a, NodeId b, Sign s);
  void erase(NodeId a, NodeId b);

  SignedGraph to_graph() const;

 private:
  std::vector<std::vector<Neighbor>> adj_;
};

struct PairCycleCounts {
  std::vector<std::int64_t> balanced;  // index n - 3
  std::vector<std::int64_t> unbalanced;

  std::optional<double> utility() const;
};

// Walk counts for a single pair computed locally from adjacency lists: a
// sparse signed frontier expanded from u, closed against v's neighbours.
// Equals the (u, v) entries of count_cycles on the same graph.
class PairWalkCounter {
 public:
  explicit PairWalkCounter(std::size_t num_nodes);

  PairCycleCounts count(const SignedAdjacencyLists& adj, NodeId u, NodeId v, int eta);

 private:
  std::vector<std::int64_t> pos_, neg_, next_pos_, next_neg_;
  std::vector<char> seen_;
  std::vector<NodeId> frontier_, next_frontier_;
};

struct EdgeUtility {
  SignedEdge edge;
  std::optional<double> utility;
};

// Utilities of every edge of the given sign, from count_cycles.
std::vector<EdgeUtility> edge_utilities(const SignedGraph& g, Sign sign, int eta = kDefaultEta);

// Normalised endpoint-degree-sum share of each edge: p_i = (deg u + deg v) / sum.
std::vector<double> message_shares(const SignedGraph& g);

// H(p) = -sum p_i log p_i with 0 log 0 = 0 (natural log).
double shannon_entropy(std::span<const double> p);
// Entropy of message_shares(g); throws ArgumentError on an edgeless graph.
double shannon_entropy(const SignedGraph& g);

// -d log d + (1 - d) sum -p_i log((1 - d) p_i), for d in [0, 1).
double expected_entropy_after_perturbation(std::span<const double> p, double delta);

}  // namespace sigaug
