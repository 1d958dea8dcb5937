#include "sigaug/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>
#include <unordered_map>

#include "sigaug/error.hpp"

namespace sigaug {

SignedGraph::SignedGraph(std::size_t num_nodes, std::vector<SignedEdge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  for (auto& e : edges_) {
    if (e.u >= num_nodes_ || e.v >= num_nodes_) throw ArgumentError("edge endpoint out of range");
    if (e.u == e.v) throw ArgumentError("self-loop on node " + std::to_string(e.u));
    if (e.sign != Sign::Positive && e.sign != Sign::Negative) throw ArgumentError("invalid sign");
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end(), [](const SignedEdge& a, const SignedEdge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v) {
      throw ArgumentError("duplicate edge {" + std::to_string(edges_[i].u) + ", " +
                          std::to_string(edges_[i].v) + "}");
    }
  }

  pos_offsets_.assign(num_nodes_ + 1, 0);
  neg_offsets_.assign(num_nodes_ + 1, 0);
  for (const auto& e : edges_) {
    auto& off = e.sign == Sign::Positive ? pos_offsets_ : neg_offsets_;
    ++off[e.u + 1];
    ++off[e.v + 1];
    if (e.sign == Sign::Positive) ++num_positive_;
  }
  std::partial_sum(pos_offsets_.begin(), pos_offsets_.end(), pos_offsets_.begin());
  std::partial_sum(neg_offsets_.begin(), neg_offsets_.end(), neg_offsets_.begin());
  pos_adj_.resize(pos_offsets_.back());
  neg_adj_.resize(neg_offsets_.back());
  std::vector<std::size_t> pos_cur(pos_offsets_.begin(), pos_offsets_.end() - 1);
  std::vector<std::size_t> neg_cur(neg_offsets_.begin(), neg_offsets_.end() - 1);
  for (const auto& e : edges_) {
    auto& adj = e.sign == Sign::Positive ? pos_adj_ : neg_adj_;
    auto& cur = e.sign == Sign::Positive ? pos_cur : neg_cur;
    adj[cur[e.u]++] = e.v;
    adj[cur[e.v]++] = e.u;
  }
  for (NodeId n = 0; n < num_nodes_; ++n) {
    std::sort(pos_adj_.begin() + pos_offsets_[n], pos_adj_.begin() + pos_offsets_[n + 1]);
    std::sort(neg_adj_.begin() + neg_offsets_[n], neg_adj_.begin() + neg_offsets_[n + 1]);
  }
}

std::span<const NodeId> SignedGraph::neighbors(NodeId node, Sign sign) const {
  if (node >= num_nodes_) throw ArgumentError("node out of range");
  const auto& off = sign == Sign::Positive ? pos_offsets_ : neg_offsets_;
  const auto& adj = sign == Sign::Positive ? pos_adj_ : neg_adj_;
  return std::span<const NodeId>(adj).subspan(off[node], off[node + 1] - off[node]);
}

std::size_t SignedGraph::degree(NodeId node) const {
  return neighbors(node, Sign::Positive).size() + neighbors(node, Sign::Negative).size();
}

std::optional<Sign> SignedGraph::sign_of(NodeId a, NodeId b) const {
  if (a >= num_nodes_ || b >= num_nodes_) return std::nullopt;
  for (Sign s : {Sign::Positive, Sign::Negative}) {
    const auto nb = neighbors(a, s);
    if (std::binary_search(nb.begin(), nb.end(), b)) return s;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ',' || c == ' ' || c == '\t' || c == '\r' || c == ';'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    const auto start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::optional<double> parse_number(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::vector<RatingRecord> load_edge_list(std::istream& in, EdgeFormat format) {
  std::vector<RatingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    const auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    if (view[first] == '#' || view[first] == '%') continue;

    const auto fields = tokenize(view);
    if (fields.size() != 3 && fields.size() != 4) {
      throw ParseError(line_no, "expected 3 or 4 fields, got " + std::to_string(fields.size()));
    }
    const auto weight = parse_number(fields[2]);
    if (!weight) throw ParseError(line_no, "non-numeric weight '" + std::string(fields[2]) + "'");
    if (format == EdgeFormat::Rating && (*weight < -10.0 || *weight > 10.0)) {
      throw ParseError(line_no, "rating outside [-10, 10]");
    }
    if (format == EdgeFormat::Signed && *weight != 1.0 && *weight != -1.0) {
      throw ParseError(line_no, "signed weight must be +1 or -1");
    }
    RatingRecord rec{std::string(fields[0]), std::string(fields[1]), *weight, std::nullopt};
    if (fields.size() == 4) {
      const auto ts = parse_number(fields[3]);
      if (!ts) throw ParseError(line_no, "non-numeric timestamp '" + std::string(fields[3]) + "'");
      rec.timestamp = static_cast<std::int64_t>(std::floor(*ts));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RatingRecord> load_edge_list_file(const std::string& path, EdgeFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_edge_list(in, format);
}

LabeledGraph build_labeled_graph(std::span<const RatingRecord> records, ConflictPolicy policy) {
  LabeledGraph out;
  std::unordered_map<std::string, NodeId> ids;
  auto id_of = [&](const std::string& label) {
    auto [it, inserted] = ids.try_emplace(label, static_cast<NodeId>(out.labels.size()));
    if (inserted) out.labels.push_back(label);
    return it->second;
  };

  struct PairVotes {
    std::size_t positive = 0;
    std::size_t negative = 0;
    Sign last = Sign::Positive;
  };
  std::map<std::pair<NodeId, NodeId>, PairVotes> pairs;
  for (const auto& rec : records) {
    const auto a = id_of(rec.source);
    const auto b = id_of(rec.target);
    if (a == b) continue;
    const Sign s = rec.rating > 0.0 ? Sign::Positive : Sign::Negative;
    auto& votes = pairs[{std::min(a, b), std::max(a, b)}];
    (s == Sign::Positive ? votes.positive : votes.negative) += 1;
    votes.last = s;
  }

  std::vector<SignedEdge> edges;
  edges.reserve(pairs.size());
  for (const auto& [key, votes] : pairs) {
    Sign s = Sign::Positive;
    switch (policy) {
      case ConflictPolicy::NegativeWins:
        s = votes.negative > 0 ? Sign::Negative : Sign::Positive;
        break;
      case ConflictPolicy::LastWins:
        s = votes.last;
        break;
      case ConflictPolicy::Majority:
        s = votes.positive > votes.negative ? Sign::Positive : Sign::Negative;
        break;
    }
    edges.push_back({key.first, key.second, s});
  }
  out.graph = SignedGraph(out.labels.size(), std::move(edges));
  return out;
}

SignedGraph build_graph(std::span<const RatingRecord> records, ConflictPolicy policy) {
  return build_labeled_graph(records, policy).graph;
}

EdgeSplit split_edges(const SignedGraph& g, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("test_fraction must lie in (0, 1)");
  }
  if (g.num_edges() < 2) throw ArgumentError("split_edges needs at least 2 edges");

  const auto m = g.num_edges();
  const auto test_count = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<char> is_test(m, 0);
  for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = 1;

  EdgeSplit split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  std::vector<SignedEdge> train;
  train.reserve(m - test_count);
  const auto edges = g.edges();
  for (std::size_t i = 0; i < m; ++i) {
    (is_test[i] ? split.test : train).push_back(edges[i]);
  }
  split.train = SignedGraph(g.num_nodes(), std::move(train));
  return split;
}

SignedGraph subsample_edges(const SignedGraph& g, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ArgumentError("keep_fraction must lie in (0, 1]");
  }
  if (keep_fraction == 1.0) return g;
  const auto m = g.num_edges();
  const auto keep = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(m)));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  std::vector<SignedEdge> kept;
  kept.reserve(keep);
  for (auto i : order) kept.push_back(g.edges()[i]);
  return SignedGraph(g.num_nodes(), std::move(kept));
}

std::pair<CsrMatrix, CsrMatrix> split_adjacency(const SignedGraph& g) {
  std::vector<Triplet> pos, neg;
  pos.reserve(2 * g.num_positive());
  neg.reserve(2 * g.num_negative());
  for (const auto& e : g.edges()) {
    auto& dst = e.sign == Sign::Positive ? pos : neg;
    dst.push_back({e.u, e.v, 1});
    dst.push_back({e.v, e.u, 1});
  }
  const auto n = g.num_nodes();
  return {CsrMatrix::from_triplets(n, n, std::move(pos)),
          CsrMatrix::from_triplets(n, n, std::move(neg))};
}

CsrMatrix signed_adjacency(const SignedGraph& g) {
  std::vector<Triplet> t;
  t.reserve(2 * g.num_edges());
  for (const auto& e : g.edges()) {
    t.push_back({e.u, e.v, to_int(e.sign)});
    t.push_back({e.v, e.u, to_int(e.sign)});
  }
  return CsrMatrix::from_triplets(g.num_nodes(), g.num_nodes(), std::move(t));
}

namespace {

double ratio(std::size_t neg, std::size_t pos) {
  const auto total = neg + pos;
  return total == 0 ? 0.0 : static_cast<double>(neg) / static_cast<double>(total);
}

}  // namespace

GraphStats graph_stats(const SignedGraph& g) {
  return {g.num_nodes(), g.num_positive(), g.num_negative(),
          ratio(g.num_negative(), g.num_positive())};
}

GraphStats record_stats(std::span<const RatingRecord> records) {
  std::unordered_map<std::string_view, char> labels;
  GraphStats s;
  for (const auto& r : records) {
    labels.emplace(r.source, 0);
    labels.emplace(r.target, 0);
    (r.rating > 0.0 ? s.pos_edges : s.neg_edges) += 1;
  }
  s.nodes = labels.size();
  s.neg_ratio = ratio(s.neg_edges, s.pos_edges);
  return s;
}

void write_signed_edge_list(std::ostream& out, const SignedGraph& g) {
  for (const auto& e : g.edges()) out << e.u << ' ' << e.v << ' ' << to_int(e.sign) << '\n';
}

}  // namespace sigaug
