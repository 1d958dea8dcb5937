#include "sigaug/balance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigaug/error.hpp"

namespace sigaug {

Sign path_sign(std::span<const Sign> signs) {
  if (signs.empty()) throw ArgumentError("path_sign of an empty path");
  const auto negatives = std::count(signs.begin(), signs.end(), Sign::Negative);
  return negatives % 2 == 0 ? Sign::Positive : Sign::Negative;
}

namespace {

void check_eta(int eta) {
  if (eta < 3) throw ArgumentError("eta must be at least 3");
  if (eta > kMaxEta) throw ArgumentError("eta above " + std::to_string(kMaxEta) + " is not supported");
}

void check_disjoint(const CsrMatrix& apos, const CsrMatrix& aneg) {
  for (std::size_t r = 0; r < apos.rows(); ++r) {
    const auto a = apos.row_cols(r);
    const auto b = aneg.row_cols(r);
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) throw ArgumentError("Apos and Aneg share an entry");
      a[i] < b[j] ? ++i : ++j;
    }
  }
}

}  // namespace

CycleCountSet count_cycles(const CsrMatrix& apos, const CsrMatrix& aneg, int eta) {
  check_eta(eta);
  if (apos.rows() != apos.cols() || aneg.rows() != aneg.cols() || apos.rows() != aneg.rows()) {
    throw ArgumentError("Apos and Aneg must be square with equal dimension");
  }
  if (!apos.is_symmetric() || !aneg.is_symmetric()) {
    throw ArgumentError("Apos and Aneg must be symmetric");
  }
  check_disjoint(apos, aneg);

  CycleCountSet out;
  out.eta = eta;
  out.cb.push_back(add(multiply(apos, aneg), multiply(aneg, apos)));
  out.cu.push_back(add(multiply(apos, apos), multiply(aneg, aneg)));
  for (int n = 4; n <= eta; ++n) {
    const auto& cb_prev = out.cb.back();
    const auto& cu_prev = out.cu.back();
    auto cb = add(multiply(cb_prev, apos), multiply(cu_prev, aneg));
    auto cu = add(multiply(cb_prev, aneg), multiply(cu_prev, apos));
    out.cb.push_back(std::move(cb));
    out.cu.push_back(std::move(cu));
  }
  for (std::size_t k = 0; k < out.cb.size(); ++k) out.c.push_back(add(out.cb[k], out.cu[k]));
  return out;
}

CycleCountSet count_cycles(const SignedGraph& g, int eta) {
  const auto [apos, aneg] = split_adjacency(g);
  return count_cycles(apos, aneg, eta);
}

namespace {

struct WalkEnumerator {
  const SignedGraph& g;
  int eta;
  NodeId start;
  // counts[length - 2][sign == Negative][end]
  std::vector<std::vector<std::vector<std::int64_t>>>& counts;

  void walk(NodeId at, int length, int negatives) {
    if (length >= 2) counts[length - 2][negatives % 2][at] += 1;
    if (length == eta - 1) return;
    for (Sign s : {Sign::Positive, Sign::Negative}) {
      for (NodeId next : g.neighbors(at, s)) {
        walk(next, length + 1, negatives + (s == Sign::Negative ? 1 : 0));
      }
    }
  }
};

}  // namespace

CycleCountSet oracle_count_cycles(const SignedGraph& g, int eta) {
  check_eta(eta);
  const auto n = g.num_nodes();
  if (n > kOracleMaxNodes) {
    throw RefusalError("oracle_count_cycles refuses graphs above " +
                       std::to_string(kOracleMaxNodes) + " nodes");
  }
  const auto lengths = static_cast<std::size_t>(eta - 2);
  std::vector<std::vector<Triplet>> cb(lengths), cu(lengths);
  for (NodeId u = 0; u < n; ++u) {
    std::vector<std::vector<std::vector<std::int64_t>>> counts(
        lengths, std::vector<std::vector<std::int64_t>>(2, std::vector<std::int64_t>(n, 0)));
    WalkEnumerator{g, eta, u, counts}.walk(u, 0, 0);
    for (std::size_t l = 0; l < lengths; ++l) {
      for (NodeId v = 0; v < n; ++v) {
        // An odd number of negatives on the walk closes a balanced cycle
        // through a negative edge.
        cb[l].push_back({u, v, counts[l][1][v]});
        cu[l].push_back({u, v, counts[l][0][v]});
      }
    }
  }
  CycleCountSet out;
  out.eta = eta;
  for (std::size_t l = 0; l < lengths; ++l) {
    out.cb.push_back(CsrMatrix::from_triplets(n, n, std::move(cb[l])));
    out.cu.push_back(CsrMatrix::from_triplets(n, n, std::move(cu[l])));
    out.c.push_back(add(out.cb.back(), out.cu.back()));
  }
  return out;
}

std::optional<double> edge_utility(const CycleCountSet& counts, NodeId u, NodeId v) {
  std::int64_t balanced = 0;
  std::int64_t total = 0;
  for (int n = 3; n <= counts.eta; ++n) {
    balanced += counts.balanced(n).at(u, v);
    total += counts.total(n).at(u, v);
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(balanced) / static_cast<double>(total);
}

std::string_view to_string(Verdict v) { return v == Verdict::Keep ? "keep" : "discard"; }

Verdict filter_edge(std::optional<double> utility, double mu) {
  if (!(mu >= 0.0 && mu <= kMaxMu)) throw ArgumentError("mu must lie in [0, 0.9]");
  if (!utility) return Verdict::Keep;
  return *utility >= mu ? Verdict::Keep : Verdict::Discard;
}

SignedAdjacencyLists::SignedAdjacencyLists(const SignedGraph& g) : adj_(g.num_nodes()) {
  for (const auto& e : g.edges()) {
    adj_[e.u].push_back({e.v, e.sign});
    adj_[e.v].push_back({e.u, e.sign});
  }
}

std::optional<Sign> SignedAdjacencyLists::sign_of(NodeId a, NodeId b) const {
  for (const auto& nb : adj_[a]) {
    if (nb.node == b) return nb.sign;
  }
  return std::nullopt;
}

void SignedAdjacencyLists::set(NodeId a, NodeId b, Sign s) {
  if (a == b) throw ArgumentError("self-loop");
  auto upsert = [s](std::vector<Neighbor>& list, NodeId other) {
    for (auto& nb : list) {
      if (nb.node == other) {
        nb.sign = s;
        return;
      }
    }
    list.push_back({other, s});
  };
  upsert(adj_[a], b);
  upsert(adj_[b], a);
}

void SignedAdjacencyLists::erase(NodeId a, NodeId b) {
  auto drop = [](std::vector<Neighbor>& list, NodeId other) {
    std::erase_if(list, [other](const Neighbor& nb) { return nb.node == other; });
  };
  drop(adj_[a], b);
  drop(adj_[b], a);
}

SignedGraph SignedAdjacencyLists::to_graph() const {
  std::vector<SignedEdge> edges;
  for (NodeId a = 0; a < adj_.size(); ++a) {
    for (const auto& nb : adj_[a]) {
      if (a < nb.node) edges.push_back({a, nb.node, nb.sign});
    }
  }
  return SignedGraph(adj_.size(), std::move(edges));
}

std::optional<double> PairCycleCounts::utility() const {
  const auto b = std::accumulate(balanced.begin(), balanced.end(), std::int64_t{0});
  const auto u = std::accumulate(unbalanced.begin(), unbalanced.end(), std::int64_t{0});
  if (b + u == 0) return std::nullopt;
  return static_cast<double>(b) / static_cast<double>(b + u);
}

PairWalkCounter::PairWalkCounter(std::size_t num_nodes)
    : pos_(num_nodes, 0),
      neg_(num_nodes, 0),
      next_pos_(num_nodes, 0),
      next_neg_(num_nodes, 0),
      seen_(num_nodes, 0) {}

PairCycleCounts PairWalkCounter::count(const SignedAdjacencyLists& adj, NodeId u, NodeId v,
                                       int eta) {
  check_eta(eta);
  if (adj.num_nodes() != pos_.size()) throw ArgumentError("PairWalkCounter size mismatch");
  PairCycleCounts out;
  out.balanced.assign(static_cast<std::size_t>(eta - 2), 0);
  out.unbalanced.assign(static_cast<std::size_t>(eta - 2), 0);

  // Frontier holds walks of the current length starting at u, split by sign.
  frontier_.assign(1, u);
  pos_[u] = 1;
  for (int length = 1; length <= eta - 2; ++length) {
    next_frontier_.clear();
    for (NodeId x : frontier_) {
      for (const auto& nb : adj.neighbors(x)) {
        if (!seen_[nb.node]) {
          seen_[nb.node] = 1;
          next_frontier_.push_back(nb.node);
        }
        if (nb.sign == Sign::Positive) {
          next_pos_[nb.node] += pos_[x];
          next_neg_[nb.node] += neg_[x];
        } else {
          next_pos_[nb.node] += neg_[x];
          next_neg_[nb.node] += pos_[x];
        }
      }
    }
    for (NodeId x : frontier_) pos_[x] = neg_[x] = 0;
    for (NodeId x : next_frontier_) {
      seen_[x] = 0;
      pos_[x] = next_pos_[x];
      neg_[x] = next_neg_[x];
      next_pos_[x] = next_neg_[x] = 0;
    }
    frontier_.swap(next_frontier_);

    // Close walks of length + 1 edges at v.
    std::int64_t plus = 0, minus = 0;
    for (const auto& nb : adj.neighbors(v)) {
      if (nb.sign == Sign::Positive) {
        plus += pos_[nb.node];
        minus += neg_[nb.node];
      } else {
        plus += neg_[nb.node];
        minus += pos_[nb.node];
      }
    }
    const auto idx = static_cast<std::size_t>(length - 1);
    out.balanced[idx] = minus;
    out.unbalanced[idx] = plus;
  }
  for (NodeId x : frontier_) pos_[x] = neg_[x] = 0;
  return out;
}

std::vector<EdgeUtility> edge_utilities(const SignedGraph& g, Sign sign, int eta) {
  const auto counts = count_cycles(g, eta);
  std::vector<EdgeUtility> out;
  for (const auto& e : g.edges()) {
    if (e.sign == sign) out.push_back({e, edge_utility(counts, e.u, e.v)});
  }
  return out;
}

std::vector<double> message_shares(const SignedGraph& g) {
  std::vector<double> p;
  p.reserve(g.num_edges());
  double total = 0.0;
  for (const auto& e : g.edges()) {
    const auto w = static_cast<double>(g.degree(e.u) + g.degree(e.v));
    p.push_back(w);
    total += w;
  }
  for (auto& x : p) x /= total;
  return p;
}

namespace {

void check_distribution(std::span<const double> p) {
  if (p.empty()) throw ArgumentError("empty distribution");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ArgumentError("distribution has a negative or NaN entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("distribution does not sum to 1");
}

double plogp_sum(std::span<const double> p, double scale) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(scale * x);
  }
  return h;
}

}  // namespace

double shannon_entropy(std::span<const double> p) {
  check_distribution(p);
  return plogp_sum(p, 1.0);
}

double shannon_entropy(const SignedGraph& g) {
  if (g.num_edges() == 0) throw ArgumentError("entropy of an edgeless graph");
  return shannon_entropy(message_shares(g));
}

double expected_entropy_after_perturbation(std::span<const double> p, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in [0, 1)");
  check_distribution(p);
  const double own = delta > 0.0 ? -delta * std::log(delta) : 0.0;
  return own + (1.0 - delta) * plogp_sum(p, 1.0 - delta);
}

}  // namespace sigaug
