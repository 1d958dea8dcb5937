#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sigaug/graph.hpp"

namespace sigaug {

using Matrix = Eigen::MatrixXd;

// Two-branch signed GNN parameters.
//
// Layer 1 maps [x_i | mean_{N+} x_j] (positive branch) and [x_i | mean_{N-} x_j]
// (negative branch) to d/2 columns. Deeper layers take
//   positive: [h+_i | mean_{N+} h+_j | mean_{N-} h-_k]
//   negative: [h-_i | mean_{N+} h-_j | mean_{N-} h+_k]
// Weights are stored input-major (in x out) so that H = tanh(In * W).
struct ModelParams {
  std::vector<Matrix> pos_weights;
  std::vector<Matrix> neg_weights;
  // (2d) x 3 classifier over the pair feature [Z_i | Z_j]; columns are the
  // classes +, -, ? in that order.
  Matrix classifier;

  std::size_t layers() const noexcept { return pos_weights.size(); }
  Eigen::Index input_dim() const { return pos_weights.front().rows() / 2; }
  Eigen::Index branch_dim() const { return pos_weights.front().cols(); }
  Eigen::Index embedding_dim() const { return 2 * branch_dim(); }

  std::size_t parameter_count() const;

  // Xavier-uniform initialisation.
  static ModelParams init(Eigen::Index input_dim, Eigen::Index embedding_dim, std::size_t layers,
                          std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  // Flat views in a fixed order: pos layers, neg layers, classifier.
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
};

enum class EdgeClass : int { Positive = 0, Negative = 1, None = 2 };

struct PairSample {
  NodeId i = 0;
  NodeId j = 0;
  EdgeClass cls = EdgeClass::None;
};

// (i, j) is a labelled edge and (i, k) a non-adjacent pair.
struct HingeTriple {
  NodeId i = 0;
  NodeId j = 0;
  NodeId k = 0;
};

struct LossSamples {
  std::vector<PairSample> pairs;
  std::vector<HingeTriple> positive_triples;  // E(+,?)
  std::vector<HingeTriple> negative_triples;  // E(-,?)
};

enum class FeatureMode { RandomFixed };

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  double lambda = 5.0;
  // Per-class weights for +, -, ?; empty means inverse class frequency.
  std::optional<std::array<double, 3>> class_weights;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  FeatureMode feature_mode = FeatureMode::RandomFixed;
  int input_dim = 64;
  int embedding_dim = 64;
  int layers = 2;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

struct EmbeddingPair {
  Matrix zpos;
  Matrix zneg;
};

// Uniform entries in [-a, a], a = sqrt(3 / D), so rows have unit expected norm.
Matrix synth_features(std::size_t num_nodes, Eigen::Index dim, std::uint64_t seed);

EmbeddingPair forward(const SignedGraph& g, const ModelParams& params, const Matrix& features);

// Row-wise [Z+ | Z-].
Matrix concat(const EmbeddingPair& pair);

// Pair feature [Z_a | Z_b] in the order given. Samples and edges carry
// their endpoints as u < v, which fixes the orientation for undirected pairs.
Eigen::RowVectorXd pair_feature(const Matrix& z, NodeId a, NodeId b);

std::array<double, 3> inverse_frequency_weights(std::span<const PairSample> pairs);

// Weighted three-class cross-entropy + lambda * (two hinge terms) +
// weight_decay * ||params||^2.
double loss(const Matrix& z, const LossSamples& samples, const ModelParams& params,
            const TrainConfig& cfg);

struct LossGradient {
  double value = 0.0;
  ModelParams gradient;
};

LossGradient loss_and_gradient(const SignedGraph& g, const Matrix& features,
                               const ModelParams& params, const LossSamples& samples,
                               const TrainConfig& cfg);

// Samples for one epoch: every supervision edge, |edges| uniformly drawn
// non-adjacent pairs, and one non-adjacent partner k per labelled edge.
LossSamples draw_samples(const SignedGraph& supervision, std::uint64_t seed);

struct TrainResult {
  ModelParams params;
  EmbeddingPair embeddings;
  Matrix features;
  std::vector<double> loss_trace;
};

// Message passing runs over `structure`; the loss is taken on `supervision`.
TrainResult train(const SignedGraph& structure, const SignedGraph& supervision,
                  const TrainConfig& cfg);
TrainResult train(const SignedGraph& g, const TrainConfig& cfg);

// Max relative error between central differences and the analytic gradient
// over `probes` randomly chosen parameters.
double gradient_check(const SignedGraph& g, const TrainConfig& cfg, double epsilon,
                      std::size_t probes = 64);

struct EgoTree {
  SignedGraph tree;
  std::vector<NodeId> origin;  // source node of each tree node
  std::vector<int> level;
  NodeId root = 0;
};

// Level-by-level unrolling: every node on level l < k gets a copy of each of
// its source-graph neighbours on level l + 1, joined by an edge of the same sign.
EgoTree build_k_hop_ego_tree(const SignedGraph& g, NodeId root, int k);

// Rows of `features` copied along the tree's origin map.
Matrix tree_features(const EgoTree& tree, const Matrix& features);

// Canonical string of the rooted signed tree, labelling each tree node by
// `node_label[origin]`. Equal strings mean isomorphic trees.
std::string rooted_signature(const EgoTree& tree, std::span<const int> node_label);

inline constexpr std::string_view kParamsMagic = "SIGAUG-PARAMS-1";

void save_params(std::ostream& out, const ModelParams& params);
ModelParams load_params(std::istream& in);

void write_embeddings(std::ostream& out, const Matrix& z);
// Inverse of write_embeddings; the first d/2 columns are Z+, the rest Z-.
EmbeddingPair read_embeddings(std::istream& in);

}  // namespace sigaug
