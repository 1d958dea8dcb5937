#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "sigaug/balance.hpp"
#include "sigaug/graph.hpp"
#include "sigaug/sgnn.hpp"

namespace sigaug {

inline constexpr double kDivisionGuard = 1e-8;
inline constexpr double kMaskedProbability = std::numeric_limits<double>::lowest();

// Edge propensities from cosine similarity of the branch embeddings:
//   M+ = Z+ Z+^T,  M- = 1 / (Z- Z-^T)
// evaluated on demand from L2-normalised rows. Similarities with magnitude
// below kDivisionGuard are pushed away from zero by kDivisionGuard, keeping
// their sign, before the reciprocal. Diagonals read kMaskedProbability.
class ProbabilityMatrices {
 public:
  ProbabilityMatrices() = default;
  ProbabilityMatrices(Matrix pos_unit, Matrix neg_unit);

  std::size_t size() const noexcept { return static_cast<std::size_t>(pos_unit_.rows()); }

  double mpos(NodeId i, NodeId j) const;
  double mneg(NodeId i, NodeId j) const;

  // Row i of M+ / M- for all columns (diagonal masked).
  void mpos_row(NodeId i, Eigen::VectorXd& out) const;
  void mneg_row(NodeId i, Eigen::VectorXd& out) const;

  Matrix dense_pos() const;
  Matrix dense_neg() const;

 private:
  Matrix pos_unit_;
  Matrix neg_unit_;
};

double guarded_reciprocal(double similarity);

ProbabilityMatrices edge_probabilities(const EmbeddingPair& pair);

struct EPRConfig {
  double theta_target = 1.0 / 9.0;  // |perturbed +| / |perturbed -|
  double delta_target = 0.6;        // |perturbed| / |original edges|
  double mu = 0.7;
  int eta = kDefaultEta;

  friend bool operator==(const EPRConfig&, const EPRConfig&) = default;
};

void validate(const EPRConfig& cfg);

enum class Action { Add, Remove };
enum class LogVerdict { Keep, Discard, NotApplicable };

struct PerturbationEntry {
  std::size_t step = 0;
  Action action = Action::Add;
  Sign sign = Sign::Positive;
  NodeId u = 0;
  NodeId v = 0;
  double probability = 0.0;
  LogVerdict verdict = LogVerdict::NotApplicable;
  std::optional<double> utility;  // set for EUF-evaluated negative additions

  bool kept() const noexcept { return verdict != LogVerdict::Discard; }
};

struct PerturbationLog {
  std::vector<PerturbationEntry> entries;
  std::size_t kept_positive = 0;
  std::size_t kept_negative = 0;

  std::size_t kept() const noexcept { return kept_positive + kept_negative; }
};

// |p - theta q| <= 1 or |q - p / theta| <= 1.
bool sign_ratio_within_one_edge(std::size_t positive, std::size_t negative, double theta);

enum class EprDecision { Continue, Stop };

// Stop once |kept| / |E| >= delta_target and the kept sign ratio is within
// one edge of theta_target.
EprDecision epr_check(const PerturbationLog& log, const EPRConfig& cfg,
                      std::size_t original_edge_count);

// Fusion of one pair. apos in {0, 1}, aneg in {0, -1}. Returns -1, 0 or 1.
int fuse_entry(int apos, int aneg, double mpos, double mneg);

// apos_aug / aneg_aug are 0/1 indicator matrices (aneg marks -1 entries).
SignedGraph fuse(const CsrMatrix& apos_aug, const CsrMatrix& aneg_aug,
                 const ProbabilityMatrices& probs);

struct AugmentedGraph {
  SignedGraph graph;
  CsrMatrix apos_aug;
  CsrMatrix aneg_aug;
  PerturbationLog log;
  bool thresholds_unmet = false;
  std::size_t rounds = 0;
};

// Stepwise augmentation state. Each step() performs one round of up to four
// actions (add max M+, remove min M+, EUF-gated add max M-, remove min M-),
// checking the regulator after every action.
class Augmenter {
 public:
  Augmenter(const SignedGraph& g, ProbabilityMatrices probs, EPRConfig cfg);
  ~Augmenter();
  Augmenter(Augmenter&&) noexcept;
  Augmenter& operator=(Augmenter&&) noexcept;

  // Returns the number of actions attempted this round; 0 means every
  // eligible pool is exhausted or blocked.
  std::size_t step();

  bool stopped() const;
  const PerturbationLog& log() const;
  // Current fused graph.
  const SignedAdjacencyLists& working() const;
  bool is_spent(NodeId u, NodeId v) const;

  AugmentedGraph finish() &&;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

AugmentedGraph augment(const SignedGraph& g, const EmbeddingPair& pair, const EPRConfig& cfg);
AugmentedGraph augment(const SignedGraph& g, const ProbabilityMatrices& probs,
                       const EPRConfig& cfg);

// Number of logged kept additions that coincide with a held-out pair.
std::size_t count_test_overlap(const PerturbationLog& log, std::span<const SignedEdge> test);

// `step action sign u v prob verdict` per entry.
void write_log(std::ostream& out, const PerturbationLog& log);

}  // namespace sigaug
