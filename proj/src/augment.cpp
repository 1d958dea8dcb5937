#include "sigaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>

#include <spdlog/spdlog.h>

#include "sigaug/error.hpp"
#include "sigaug/format.hpp"

namespace sigaug {

double guarded_reciprocal(double similarity) {
  if (std::abs(similarity) < kDivisionGuard) {
    similarity = similarity < 0.0 ? similarity - kDivisionGuard : similarity + kDivisionGuard;
  }
  return 1.0 / similarity;
}

ProbabilityMatrices::ProbabilityMatrices(Matrix pos_unit, Matrix neg_unit)
    : pos_unit_(std::move(pos_unit)), neg_unit_(std::move(neg_unit)) {
  if (pos_unit_.rows() != neg_unit_.rows()) throw ArgumentError("embedding row mismatch");
}

double ProbabilityMatrices::mpos(NodeId i, NodeId j) const {
  if (i == j) return kMaskedProbability;
  return pos_unit_.row(i).dot(pos_unit_.row(j));
}

double ProbabilityMatrices::mneg(NodeId i, NodeId j) const {
  if (i == j) return kMaskedProbability;
  return guarded_reciprocal(neg_unit_.row(i).dot(neg_unit_.row(j)));
}

void ProbabilityMatrices::mpos_row(NodeId i, Eigen::VectorXd& out) const {
  out.noalias() = pos_unit_ * pos_unit_.row(i).transpose();
  out(i) = kMaskedProbability;
}

void ProbabilityMatrices::mneg_row(NodeId i, Eigen::VectorXd& out) const {
  out.noalias() = neg_unit_ * neg_unit_.row(i).transpose();
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = guarded_reciprocal(out(j));
  out(i) = kMaskedProbability;
}

Matrix ProbabilityMatrices::dense_pos() const {
  const auto n = static_cast<Eigen::Index>(size());
  Matrix m(n, n);
  Eigen::VectorXd row;
  for (Eigen::Index i = 0; i < n; ++i) {
    mpos_row(static_cast<NodeId>(i), row);
    m.row(i) = row.transpose();
  }
  return m;
}

Matrix ProbabilityMatrices::dense_neg() const {
  const auto n = static_cast<Eigen::Index>(size());
  Matrix m(n, n);
  Eigen::VectorXd row;
  for (Eigen::Index i = 0; i < n; ++i) {
    mneg_row(static_cast<NodeId>(i), row);
    m.row(i) = row.transpose();
  }
  return m;
}

ProbabilityMatrices edge_probabilities(const EmbeddingPair& pair) {
  if (!pair.zpos.allFinite() || !pair.zneg.allFinite()) {
    throw ArgumentError("embeddings contain non-finite entries");
  }
  auto normalize = [](const Matrix& z, const char* name) {
    Matrix unit = z;
    std::size_t zero_rows = 0;
    for (Eigen::Index r = 0; r < unit.rows(); ++r) {
      const double norm = unit.row(r).norm();
      if (norm > 0.0) {
        unit.row(r) /= norm;
      } else {
        ++zero_rows;
      }
    }
    if (zero_rows > 0) {
      spdlog::warn("{} zero-norm {} embedding rows; their similarities fall back to the division guard",
                   zero_rows, name);
    }
    return unit;
  };
  return ProbabilityMatrices(normalize(pair.zpos, "positive"), normalize(pair.zneg, "negative"));
}

void validate(const EPRConfig& cfg) {
  if (!(cfg.theta_target > 0.0) || !std::isfinite(cfg.theta_target)) {
    throw ArgumentError("theta must be > 0");
  }
  if (!(cfg.delta_target >= 0.0 && cfg.delta_target <= 1.0)) {
    throw ArgumentError("delta must lie in [0, 1]");
  }
  if (!(cfg.mu >= 0.0 && cfg.mu <= kMaxMu)) throw ArgumentError("mu must lie in [0, 0.9]");
  if (cfg.eta < 3 || cfg.eta > kMaxEta) throw ArgumentError("eta must lie in [3, 6]");
}

bool sign_ratio_within_one_edge(std::size_t positive, std::size_t negative, double theta) {
  constexpr double slack = 1e-9;
  const auto p = static_cast<double>(positive);
  const auto q = static_cast<double>(negative);
  return std::abs(p - theta * q) <= 1.0 + slack || std::abs(q - p / theta) <= 1.0 + slack;
}

EprDecision epr_check(const PerturbationLog& log, const EPRConfig& cfg,
                      std::size_t original_edge_count) {
  if (original_edge_count == 0) throw ArgumentError("original edge count must be positive");
  const double realized = static_cast<double>(log.kept()) / static_cast<double>(original_edge_count);
  const bool enough = realized + 1e-12 >= cfg.delta_target;
  const bool balanced = sign_ratio_within_one_edge(log.kept_positive, log.kept_negative, cfg.theta_target);
  return enough && balanced ? EprDecision::Stop : EprDecision::Continue;
}

int fuse_entry(int apos, int aneg, double mpos, double mneg) {
  if (apos != 0 && apos != 1) throw ArgumentError("positive adjacency entry must be 0 or 1");
  if (aneg != 0 && aneg != -1) throw ArgumentError("negative adjacency entry must be 0 or -1");
  if (apos == 0 && aneg == 0) return 0;
  if (apos == 0 || aneg == 0) return apos + aneg;
  return mpos > mneg ? 1 : -1;
}

SignedGraph fuse(const CsrMatrix& apos_aug, const CsrMatrix& aneg_aug,
                 const ProbabilityMatrices& probs) {
  const auto n = apos_aug.rows();
  if (apos_aug.cols() != n || aneg_aug.rows() != n || aneg_aug.cols() != n) {
    throw ArgumentError("fuse: matrices must be square with equal dimension");
  }
  if (!apos_aug.is_symmetric() || !aneg_aug.is_symmetric()) {
    throw ArgumentError("fuse: matrices must be symmetric");
  }
  if (probs.size() != n) throw ArgumentError("fuse: probability matrices have the wrong size");
  std::vector<SignedEdge> edges;
  for (std::size_t r = 0; r < n; ++r) {
    const auto pc = apos_aug.row_cols(r);
    const auto nc = aneg_aug.row_cols(r);
    std::size_t i = 0, j = 0;
    while (i < pc.size() || j < nc.size()) {
      std::size_t c;
      int ap = 0, an = 0;
      if (j == nc.size() || (i < pc.size() && pc[i] < nc[j])) {
        c = pc[i++];
        ap = 1;
      } else if (i == pc.size() || nc[j] < pc[i]) {
        c = nc[j++];
        an = -1;
      } else {
        c = pc[i];
        ++i;
        ++j;
        ap = 1;
        an = -1;
      }
      if (c <= r) continue;
      const auto u = static_cast<NodeId>(r);
      const auto v = static_cast<NodeId>(c);
      const int s = fuse_entry(ap, an, probs.mpos(u, v), probs.mneg(u, v));
      if (s != 0) edges.push_back({u, v, s > 0 ? Sign::Positive : Sign::Negative});
    }
  }
  return SignedGraph(n, std::move(edges));
}

namespace {

struct RankedPair {
  double score = 0.0;
  NodeId u = 0;
  NodeId v = 0;
};

// Strict total order: by score (descending or ascending), then (u, v).
struct RankOrder {
  bool descending = true;
  bool operator()(const RankedPair& a, const RankedPair& b) const {
    if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  }
};

// Pairs u < v in rank order, materialised in batches so that large graphs
// never hold all n^2 / 2 candidates at once.
class AdditionStream {
 public:
  AdditionStream(const ProbabilityMatrices* probs, bool positive, std::size_t batch)
      : probs_(probs), positive_(positive), batch_(std::max<std::size_t>(batch, 64)) {}

  template <typename Excluded>
  std::optional<RankedPair> next(Excluded&& excluded) {
    while (true) {
      if (cursor_ == buffer_.size() && !refill(excluded)) return std::nullopt;
      const auto c = buffer_[cursor_++];
      last_ = c;
      if (!excluded(c.u, c.v)) return c;
    }
  }

 private:
  template <typename Excluded>
  bool refill(Excluded& excluded) {
    if (exhausted_) return false;
    buffer_.clear();
    cursor_ = 0;
    const RankOrder order{true};
    // Max-heap on rank order keeps the `batch_` best pairs after last_.
    std::priority_queue<RankedPair, std::vector<RankedPair>, RankOrder> heap(order);
    const auto n = probs_->size();
    Eigen::VectorXd row;
    for (NodeId u = 0; u + 1 < n; ++u) {
      positive_ ? probs_->mpos_row(u, row) : probs_->mneg_row(u, row);
      for (NodeId v = u + 1; v < n; ++v) {
        const RankedPair cand{row(v), u, v};
        if (last_ && !order(*last_, cand)) continue;
        if (heap.size() == batch_ && !order(cand, heap.top())) continue;
        if (excluded(u, v)) continue;
        heap.push(cand);
        if (heap.size() > batch_) heap.pop();
      }
    }
    while (!heap.empty()) {
      buffer_.push_back(heap.top());
      heap.pop();
    }
    std::reverse(buffer_.begin(), buffer_.end());
    if (buffer_.size() < batch_) exhausted_ = true;
    return !buffer_.empty();
  }

  const ProbabilityMatrices* probs_;
  bool positive_;
  std::size_t batch_;
  std::vector<RankedPair> buffer_;
  std::size_t cursor_ = 0;
  std::optional<RankedPair> last_;
  bool exhausted_ = false;
};

}  // namespace

struct Augmenter::State {
  std::size_t n = 0;
  ProbabilityMatrices probs;
  EPRConfig cfg;
  std::size_t original_edges = 0;

  std::unordered_set<std::uint64_t> apos, aneg, spent;
  SignedAdjacencyLists working;
  PairWalkCounter counter;

  std::unique_ptr<AdditionStream> add_pos, add_neg;
  std::vector<RankedPair> remove_pos, remove_neg;  // ascending rank order
  std::size_t remove_pos_cursor = 0, remove_neg_cursor = 0;

  PerturbationLog log;
  std::size_t rounds = 0;
  bool stopped = false;

  State(const SignedGraph& g, ProbabilityMatrices p, EPRConfig c)
      : n(g.num_nodes()),
        probs(std::move(p)),
        cfg(c),
        original_edges(g.num_edges()),
        working(g),
        counter(g.num_nodes()) {}

  std::uint64_t key(NodeId a, NodeId b) const {
    return static_cast<std::uint64_t>(std::min(a, b)) * n + std::max(a, b);
  }

  bool allowed(Sign s) const {
    constexpr double slack = 1e-9;
    const auto p = static_cast<double>(log.kept_positive);
    const auto q = static_cast<double>(log.kept_negative);
    if (s == Sign::Positive) return (p + 1.0) - cfg.theta_target * q <= 1.0 + slack;
    return (q + 1.0) - p / cfg.theta_target <= 1.0 + slack;
  }

  void refuse(NodeId u, NodeId v) {
    const auto k = key(u, v);
    const int s = fuse_entry(apos.contains(k) ? 1 : 0, aneg.contains(k) ? -1 : 0,
                             probs.mpos(u, v), probs.mneg(u, v));
    if (s == 0) {
      working.erase(u, v);
    } else {
      working.set(u, v, s > 0 ? Sign::Positive : Sign::Negative);
    }
  }

  std::optional<RankedPair> next_removal(std::vector<RankedPair>& pool, std::size_t& cursor,
                                         const std::unordered_set<std::uint64_t>& present) {
    while (cursor < pool.size()) {
      const auto c = pool[cursor++];
      const auto k = key(c.u, c.v);
      if (!spent.contains(k) && present.contains(k)) return c;
    }
    return std::nullopt;
  }

  bool check_stop() {
    if (epr_check(log, cfg, original_edges) == EprDecision::Stop) stopped = true;
    return stopped;
  }
};

Augmenter::Augmenter(const SignedGraph& g, ProbabilityMatrices probs, EPRConfig cfg) {
  validate(cfg);
  if (g.num_edges() == 0) throw ArgumentError("augment needs a graph with at least one edge");
  if (probs.size() != g.num_nodes()) throw ArgumentError("probability matrices do not match graph");
  state_ = std::make_unique<State>(g, std::move(probs), cfg);
  auto& s = *state_;
  const auto budget = static_cast<std::size_t>(std::ceil(cfg.delta_target * static_cast<double>(g.num_edges())));
  s.add_pos = std::make_unique<AdditionStream>(&s.probs, true, 2 * budget + 16);
  s.add_neg = std::make_unique<AdditionStream>(&s.probs, false, 4 * budget + 16);
  for (const auto& e : g.edges()) {
    if (e.sign == Sign::Positive) {
      s.apos.insert(s.key(e.u, e.v));
      s.remove_pos.push_back({s.probs.mpos(e.u, e.v), e.u, e.v});
    } else {
      s.aneg.insert(s.key(e.u, e.v));
      s.remove_neg.push_back({s.probs.mneg(e.u, e.v), e.u, e.v});
    }
  }
  std::sort(s.remove_pos.begin(), s.remove_pos.end(), RankOrder{false});
  std::sort(s.remove_neg.begin(), s.remove_neg.end(), RankOrder{false});
  s.check_stop();
}

Augmenter::~Augmenter() = default;
Augmenter::Augmenter(Augmenter&&) noexcept = default;
Augmenter& Augmenter::operator=(Augmenter&&) noexcept = default;

std::size_t Augmenter::step() {
  auto& s = *state_;
  if (s.stopped) return 0;
  ++s.rounds;
  std::size_t attempted = 0;

  auto record = [&](Action action, Sign sign, const RankedPair& c, LogVerdict verdict,
                    std::optional<double> utility) {
    s.spent.insert(s.key(c.u, c.v));
    s.log.entries.push_back({s.rounds, action, sign, c.u, c.v, c.score, verdict, utility});
    if (verdict != LogVerdict::Discard) {
      (sign == Sign::Positive ? s.log.kept_positive : s.log.kept_negative) += 1;
    }
    ++attempted;
  };

  // Positive addition: non-spent pair with the largest M+ not already in A+.
  if (s.allowed(Sign::Positive)) {
    auto c = s.add_pos->next([&](NodeId u, NodeId v) {
      const auto k = s.key(u, v);
      return s.spent.contains(k) || s.apos.contains(k);
    });
    if (c) {
      s.apos.insert(s.key(c->u, c->v));
      s.refuse(c->u, c->v);
      record(Action::Add, Sign::Positive, *c, LogVerdict::NotApplicable, std::nullopt);
      if (s.check_stop()) return attempted;
    }
  }

  if (s.allowed(Sign::Positive)) {
    if (auto c = s.next_removal(s.remove_pos, s.remove_pos_cursor, s.apos)) {
      s.apos.erase(s.key(c->u, c->v));
      s.refuse(c->u, c->v);
      record(Action::Remove, Sign::Positive, *c, LogVerdict::NotApplicable, std::nullopt);
      if (s.check_stop()) return attempted;
    }
  }

  // Negative addition, gated by the edge utility filter on the current graph.
  if (s.allowed(Sign::Negative)) {
    auto c = s.add_neg->next([&](NodeId u, NodeId v) {
      const auto k = s.key(u, v);
      return s.spent.contains(k) || s.aneg.contains(k);
    });
    if (c) {
      const auto utility = s.counter.count(s.working, c->u, c->v, s.cfg.eta).utility();
      const auto verdict = filter_edge(utility, s.cfg.mu);
      if (verdict == Verdict::Keep) {
        s.aneg.insert(s.key(c->u, c->v));
        s.refuse(c->u, c->v);
      }
      record(Action::Add, Sign::Negative, *c,
             verdict == Verdict::Keep ? LogVerdict::Keep : LogVerdict::Discard, utility);
      if (s.check_stop()) return attempted;
    }
  }

  if (s.allowed(Sign::Negative)) {
    if (auto c = s.next_removal(s.remove_neg, s.remove_neg_cursor, s.aneg)) {
      s.aneg.erase(s.key(c->u, c->v));
      s.refuse(c->u, c->v);
      record(Action::Remove, Sign::Negative, *c, LogVerdict::NotApplicable, std::nullopt);
      if (s.check_stop()) return attempted;
    }
  }
  return attempted;
}

bool Augmenter::stopped() const { return state_->stopped; }
const PerturbationLog& Augmenter::log() const { return state_->log; }
const SignedAdjacencyLists& Augmenter::working() const { return state_->working; }

bool Augmenter::is_spent(NodeId u, NodeId v) const {
  return state_->spent.contains(state_->key(u, v));
}

AugmentedGraph Augmenter::finish() && {
  auto& s = *state_;
  auto to_matrix = [&](const std::unordered_set<std::uint64_t>& keys) {
    std::vector<Triplet> t;
    t.reserve(2 * keys.size());
    for (auto k : keys) {
      const auto u = static_cast<std::size_t>(k / s.n);
      const auto v = static_cast<std::size_t>(k % s.n);
      t.push_back({u, v, 1});
      t.push_back({v, u, 1});
    }
    return CsrMatrix::from_triplets(s.n, s.n, std::move(t));
  };
  AugmentedGraph out;
  out.apos_aug = to_matrix(s.apos);
  out.aneg_aug = to_matrix(s.aneg);
  out.graph = s.working.to_graph();
  out.log = std::move(s.log);
  out.thresholds_unmet = !s.stopped;
  out.rounds = s.rounds;
  return out;
}

AugmentedGraph augment(const SignedGraph& g, const ProbabilityMatrices& probs,
                       const EPRConfig& cfg) {
  Augmenter augmenter(g, probs, cfg);
  while (!augmenter.stopped()) {
    if (augmenter.step() == 0) break;
  }
  auto out = std::move(augmenter).finish();
  if (out.thresholds_unmet) {
    spdlog::warn("augmentation pools exhausted before the regulator thresholds were met "
                 "({} kept of {} original edges)",
                 out.log.kept(), g.num_edges());
  }
  return out;
}

AugmentedGraph augment(const SignedGraph& g, const EmbeddingPair& pair, const EPRConfig& cfg) {
  if (static_cast<std::size_t>(pair.zpos.rows()) != g.num_nodes()) {
    throw ArgumentError("embedding rows do not match node count");
  }
  return augment(g, edge_probabilities(pair), cfg);
}

std::size_t count_test_overlap(const PerturbationLog& log, std::span<const SignedEdge> test) {
  std::unordered_set<std::uint64_t> keys;
  auto key = [](NodeId a, NodeId b) {
    return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
  };
  for (const auto& e : test) keys.insert(key(e.u, e.v));
  std::size_t count = 0;
  for (const auto& entry : log.entries) {
    if (entry.action == Action::Add && entry.kept() && keys.contains(key(entry.u, entry.v))) ++count;
  }
  return count;
}

void write_log(std::ostream& out, const PerturbationLog& log) {
  for (const auto& e : log.entries) {
    out << e.step << ' ' << (e.action == Action::Add ? "add" : "remove") << ' '
        << (e.sign == Sign::Positive ? "+1" : "-1") << ' ' << e.u << ' ' << e.v << ' '
        << format_double(e.probability) << ' ';
    switch (e.verdict) {
      case LogVerdict::Keep: out << "keep"; break;
      case LogVerdict::Discard: out << "discard"; break;
      case LogVerdict::NotApplicable: out << "n/a"; break;
    }
    out << '\n';
  }
}

}  // namespace sigaug
