#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "sigaug/error.hpp"
#include "sigaug/sgnn.hpp"
#include "test_util.hpp"

using namespace sigaug;
using sigaug::testing::random_signed_graph;
using sigaug::testing::triangle;

namespace {

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.input_dim = 5;
  cfg.embedding_dim = 6;
  cfg.layers = 2;
  return cfg;
}

// Random graph with at least one edge of each sign.
SignedGraph mixed_graph(std::size_t n, double density, std::uint64_t seed) {
  for (std::uint64_t s = seed;; s += 1000) {
    auto g = random_signed_graph(n, density, 0.35, s);
    if (g.num_positive() > 0 && g.num_negative() > 0) return g;
  }
}

// Scalar re-implementation of the objective for a handful of samples.
double scalar_loss(const Matrix& z, const LossSamples& s, const ModelParams& p, const TrainConfig& cfg) {
  const auto d = z.cols();
  std::array<double, 3> counts{};
  for (const auto& x : s.pairs) counts[static_cast<int>(x.cls)] += 1;
  std::array<double, 3> w{};
  for (int c = 0; c < 3; ++c) {
    w[c] = counts[c] > 0 ? static_cast<double>(s.pairs.size()) / (3.0 * counts[c]) : 1.0;
  }
  if (cfg.class_weights) w = *cfg.class_weights;
  double ce = 0.0;
  for (const auto& x : s.pairs) {
    double logit[3] = {0, 0, 0};
    for (int c = 0; c < 3; ++c) {
      for (Eigen::Index t = 0; t < d; ++t) {
        logit[c] += z(x.i, t) * p.classifier(t, c) + z(x.j, t) * p.classifier(d + t, c);
      }
    }
    const double lse = std::log(std::exp(logit[0]) + std::exp(logit[1]) + std::exp(logit[2]));
    ce += -w[static_cast<int>(x.cls)] * (logit[static_cast<int>(x.cls)] - lse);
  }
  ce /= static_cast<double>(s.pairs.size());
  auto sq = [&](NodeId a, NodeId b) {
    double acc = 0;
    for (Eigen::Index t = 0; t < d; ++t) acc += (z(a, t) - z(b, t)) * (z(a, t) - z(b, t));
    return acc;
  };
  double hp = 0, hn = 0;
  for (const auto& t : s.positive_triples) hp += std::max(0.0, sq(t.i, t.j) - sq(t.i, t.k));
  for (const auto& t : s.negative_triples) hn += std::max(0.0, sq(t.i, t.k) - sq(t.i, t.j));
  if (!s.positive_triples.empty()) hp /= static_cast<double>(s.positive_triples.size());
  if (!s.negative_triples.empty()) hn /= static_cast<double>(s.negative_triples.size());
  double reg = 0;
  for (const auto& m : p.pos_weights) reg += m.squaredNorm();
  for (const auto& m : p.neg_weights) reg += m.squaredNorm();
  reg += p.classifier.squaredNorm();
  return ce + cfg.lambda * (hp + hn) + cfg.weight_decay * reg;
}

double distance(const Matrix& z, NodeId a, NodeId b) { return (z.row(a) - z.row(b)).norm(); }

}  // namespace

TEST(SynthFeatures, DeterministicAndBounded) {
  EXPECT_EQ(synth_features(10, 8, 3), synth_features(10, 8, 3));
  EXPECT_NE(synth_features(10, 8, 3), synth_features(10, 8, 4));
  const auto one = synth_features(200, 1, 1);
  EXPECT_EQ(one.cols(), 1);
  EXPECT_LE(one.cwiseAbs().maxCoeff(), std::sqrt(3.0));
  const auto wide = synth_features(500, 64, 2);
  const double mean_norm = wide.rowwise().norm().mean();
  EXPECT_GE(mean_norm, 0.8);
  EXPECT_LE(mean_norm, 1.2);
  EXPECT_THROW(synth_features(3, 0, 1), ArgumentError);
}

TEST(Forward, IsolatedNodeSeesZeroAggregate) {
  const SignedGraph g(3, {{0, 1, Sign::Negative}});
  const auto p = ModelParams::init(4, 6, 1, 7);
  const auto x = synth_features(3, 4, 1);
  const auto out = forward(g, p, x);
  Eigen::RowVectorXd in(8);
  in << x.row(2), Eigen::RowVectorXd::Zero(4);
  const Eigen::RowVectorXd hp = (in * p.pos_weights[0]).array().tanh().matrix();
  const Eigen::RowVectorXd hn = (in * p.neg_weights[0]).array().tanh().matrix();
  EXPECT_LT((out.zpos.row(2) - hp).norm(), 1e-15);
  EXPECT_LT((out.zneg.row(2) - hn).norm(), 1e-15);
}

TEST(Forward, FirstLayerUsesSignedMeans) {
  const SignedGraph g(4, {{0, 1, Sign::Positive}, {0, 2, Sign::Positive}, {0, 3, Sign::Negative}});
  const auto p = ModelParams::init(3, 4, 1, 2);
  const auto x = synth_features(4, 3, 5);
  const auto out = forward(g, p, x);
  Eigen::RowVectorXd in_pos(6), in_neg(6);
  in_pos << x.row(0), 0.5 * (x.row(1) + x.row(2));
  in_neg << x.row(0), x.row(3);
  EXPECT_LT((out.zpos.row(0) - (in_pos * p.pos_weights[0]).array().tanh().matrix()).norm(), 1e-15);
  EXPECT_LT((out.zneg.row(0) - (in_neg * p.neg_weights[0]).array().tanh().matrix()).norm(), 1e-15);
}

TEST(Forward, DeterministicFiniteAndShapeChecked) {
  const auto g = mixed_graph(30, 0.2, 1);
  const auto p = ModelParams::init(16, 8, 3, 4);
  const auto x = synth_features(30, 16, 2);
  const auto a = forward(g, p, x);
  const auto b = forward(g, p, x);
  EXPECT_EQ(a.zpos, b.zpos);
  EXPECT_EQ(a.zneg, b.zneg);
  EXPECT_TRUE(a.zpos.allFinite() && a.zneg.allFinite());
  const Matrix big = 1e6 * x;
  EXPECT_TRUE(forward(g, p, big).zpos.allFinite());
  EXPECT_THROW(forward(g, p, synth_features(29, 16, 2)), ArgumentError);
  EXPECT_THROW(forward(g, p, synth_features(30, 15, 2)), ArgumentError);
}

TEST(Concat, ColumnOrder) {
  EmbeddingPair pair{Matrix::Constant(3, 2, 1.0), Matrix::Constant(3, 2, 2.0)};
  const auto z = concat(pair);
  ASSERT_EQ(z.cols(), 4);
  EXPECT_EQ(z(1, 1), 1.0);
  EXPECT_EQ(z(1, 2), 2.0);
  EXPECT_TRUE(concat({Matrix::Zero(2, 1), Matrix::Zero(2, 1)}).isZero());
}

TEST(Loss, ZeroEmbeddingsGiveWeightedLogThree) {
  LossSamples s;
  s.pairs = {{0, 1, EdgeClass::Positive}, {1, 2, EdgeClass::Positive}, {0, 2, EdgeClass::Negative},
             {2, 3, EdgeClass::None}};
  auto p = ModelParams::init(2, 4, 1, 1);
  p.classifier.setZero();
  TrainConfig cfg;
  cfg.lambda = 0.0;
  cfg.weight_decay = 0.0;
  const Matrix z = Matrix::Zero(4, 4);
  // Inverse-frequency weights 4/6, 4/3, 4/3.
  const double expected = (2 * (4.0 / 6) + 4.0 / 3 + 4.0 / 3) / 4.0 * std::log(3.0);
  EXPECT_NEAR(loss(z, s, p, cfg), expected, 1e-15);
}

TEST(Loss, MatchesScalarRecomputation) {
  LossSamples s;
  s.pairs = {{0, 1, EdgeClass::Positive}, {1, 2, EdgeClass::Negative}};
  s.positive_triples = {{0, 1, 2}};
  s.negative_triples = {{1, 2, 0}};
  const auto p = ModelParams::init(2, 4, 1, 9);
  Matrix z(3, 4);
  z << 0.3, -0.2, 0.5, 0.1, -0.4, 0.6, 0.0, 0.2, 0.9, -0.1, -0.3, 0.4;
  TrainConfig cfg;
  cfg.lambda = 5.0;
  cfg.weight_decay = 1e-3;
  EXPECT_NEAR(loss(z, s, p, cfg), scalar_loss(z, s, p, cfg), 1e-12);
  cfg.class_weights = std::array<double, 3>{2.0, 0.5, 1.0};
  EXPECT_NEAR(loss(z, s, p, cfg), scalar_loss(z, s, p, cfg), 1e-12);
}

TEST(Loss, LambdaZeroDropsHingeTerms) {
  const auto g = mixed_graph(12, 0.4, 3);
  const auto samples = draw_samples(g, 5);
  const auto p = ModelParams::init(4, 6, 2, 2);
  const auto z = concat(forward(g, p, synth_features(12, 4, 1)));
  TrainConfig cfg;
  cfg.lambda = 0.0;
  LossSamples no_triples = samples;
  no_triples.positive_triples.clear();
  no_triples.negative_triples.clear();
  EXPECT_EQ(loss(z, samples, p, cfg), loss(z, no_triples, p, cfg));
  EXPECT_NEAR(loss(z, samples, p, cfg), scalar_loss(z, no_triples, p, cfg), 1e-12);
}

TEST(Loss, PermutationEquivariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = mixed_graph(14, 0.3, seed);
    const auto samples = draw_samples(g, seed);
    const auto p = ModelParams::init(4, 6, 2, seed);
    const auto x = synth_features(14, 4, seed);
    std::vector<NodeId> perm(14);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(seed));
    std::vector<SignedEdge> edges;
    for (const auto& e : g.edges()) edges.push_back({perm[e.u], perm[e.v], e.sign});
    const SignedGraph pg(14, edges);
    Matrix px(14, 4);
    for (NodeId i = 0; i < 14; ++i) px.row(perm[i]) = x.row(i);
    LossSamples ps = samples;
    for (auto& s : ps.pairs) s = {perm[s.i], perm[s.j], s.cls};
    for (auto& t : ps.positive_triples) t = {perm[t.i], perm[t.j], perm[t.k]};
    for (auto& t : ps.negative_triples) t = {perm[t.i], perm[t.j], perm[t.k]};
    TrainConfig cfg;
    const double a = loss(concat(forward(g, p, x)), samples, p, cfg);
    const double b = loss(concat(forward(pg, p, px)), ps, p, cfg);
    EXPECT_NEAR(a, b, 1e-10) << "seed " << seed;
  }
}

TEST(DrawSamples, Composition) {
  const auto g = mixed_graph(20, 0.2, 4);
  const auto s = draw_samples(g, 11);
  std::size_t none = 0;
  for (const auto& x : s.pairs) {
    if (x.cls == EdgeClass::None) {
      ++none;
      EXPECT_FALSE(g.has_edge(x.i, x.j));
      EXPECT_LT(x.i, x.j);
    } else {
      EXPECT_EQ(g.sign_of(x.i, x.j), x.cls == EdgeClass::Positive ? Sign::Positive : Sign::Negative);
    }
  }
  EXPECT_EQ(none, g.num_edges());
  EXPECT_EQ(s.positive_triples.size(), g.num_positive());
  EXPECT_EQ(s.negative_triples.size(), g.num_negative());
  for (const auto& t : s.negative_triples) {
    EXPECT_EQ(g.sign_of(t.i, t.j), Sign::Negative);
    EXPECT_FALSE(g.has_edge(t.i, t.k));
    EXPECT_NE(t.i, t.k);
  }
}

TEST(GradientCheck, FullObjectiveTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = mixed_graph(10, 0.35, seed);
    EXPECT_LT(gradient_check(g, small_config(seed), 1e-5), 1e-4) << "seed " << seed;
  }
}

TEST(GradientCheck, SingleLayerCrossEntropyOnly) {
  auto cfg = small_config(3);
  cfg.layers = 1;
  cfg.lambda = 0.0;
  EXPECT_LT(gradient_check(mixed_graph(8, 0.4, 2), cfg, 1e-5, 200), 1e-6);
}

TEST(GradientCheck, HalvingEpsilonIsStable) {
  const auto g = mixed_graph(10, 0.35, 6);
  const auto cfg = small_config(6);
  const double coarse = gradient_check(g, cfg, 1e-4);
  const double fine = gradient_check(g, cfg, 5e-5);
  EXPECT_LE(fine, 4.0 * coarse + 1e-9);
}

TEST(GradientCheck, Guards) {
  const auto g = mixed_graph(10, 0.35, 6);
  EXPECT_THROW(gradient_check(g, small_config(1), 1e-3), ArgumentError);
  auto wide = small_config(1);
  wide.embedding_dim = 16;
  EXPECT_THROW(gradient_check(g, wide, 1e-5), ArgumentError);
  EXPECT_THROW(gradient_check(mixed_graph(21, 0.2, 1), small_config(1), 1e-5), ArgumentError);
}

TEST(Train, DeterministicAndDecreasing) {
  const auto g = mixed_graph(40, 0.15, 8);
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 60;
  cfg.input_dim = 16;
  cfg.embedding_dim = 16;
  const auto a = train(g, cfg);
  const auto b = train(g, cfg);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_EQ(a.params.classifier, b.params.classifier);
  ASSERT_EQ(a.loss_trace.size(), 60u);
  EXPECT_LT(a.loss_trace.back(), a.loss_trace.front());
}

TEST(Train, FirstStepDescends) {
  const auto g = mixed_graph(16, 0.3, 2);
  TrainConfig cfg = small_config(4);
  cfg.lambda = 0.0;
  cfg.weight_decay = 0.0;
  cfg.epochs = 1;
  const auto result = train(g, cfg);
  const auto init = ModelParams::init(cfg.input_dim, cfg.embedding_dim, 2, cfg.seed + 1);
  std::mt19937_64 seeds(cfg.seed + 2);
  const auto samples = draw_samples(g, seeds());
  const auto x = synth_features(16, cfg.input_dim, cfg.seed);
  const auto lg = loss_and_gradient(g, x, init, samples, cfg);
  double dot = 0.0;
  for (std::size_t i = 0; i < init.parameter_count(); ++i) {
    dot += (result.params.at(i) - init.at(i)) * lg.gradient.at(i);
  }
  EXPECT_LT(dot, 0.0);
}

TEST(Train, RefusesSingleSignGraphs) {
  TrainConfig cfg = small_config(1);
  const SignedGraph only_pos(3, {{0, 1, Sign::Positive}, {1, 2, Sign::Positive}});
  try {
    train(only_pos, cfg);
    FAIL();
  } catch (const RefusalError& e) {
    EXPECT_NE(std::string(e.what()).find("negative"), std::string::npos);
  }
  const SignedGraph only_neg(3, {{0, 1, Sign::Negative}});
  EXPECT_THROW(train(only_neg, cfg), RefusalError);
}

TEST(Train, ValidatesConfig) {
  const auto g = mixed_graph(10, 0.3, 1);
  TrainConfig cfg = small_config(1);
  cfg.epochs = 0;
  EXPECT_THROW(train(g, cfg), ArgumentError);
  cfg = small_config(1);
  cfg.learning_rate = 0;
  EXPECT_THROW(train(g, cfg), ArgumentError);
  cfg = small_config(1);
  cfg.embedding_dim = 5;
  EXPECT_THROW(train(g, cfg), ArgumentError);
}

TEST(EgoTree, SmallCases) {
  const SignedGraph edge(2, {{0, 1, Sign::Negative}});
  const auto t1 = build_k_hop_ego_tree(edge, 0, 1);
  EXPECT_EQ(t1.tree.num_nodes(), 2u);
  EXPECT_EQ(t1.tree.sign_of(0, 1), Sign::Negative);
  // Each level-1 node copies both of its neighbours, one of them the root.
  const auto t2 = build_k_hop_ego_tree(triangle(Sign::Positive, Sign::Positive, Sign::Negative), 0, 2);
  EXPECT_EQ(t2.tree.num_nodes(), 7u);
  EXPECT_EQ(t2.tree.num_edges(), 6u);
  EXPECT_EQ(std::count(t2.level.begin(), t2.level.end(), 2), 4);
  EXPECT_THROW(build_k_hop_ego_tree(edge, 2, 1), ArgumentError);
  EXPECT_THROW(build_k_hop_ego_tree(edge, 0, 0), ArgumentError);
}

TEST(EgoTree, UnbalancedTriangleRootsAgree) {
  // i = 0, j = 1 joined negatively; both positive to k = 2.
  const SignedGraph g(3, {{0, 1, Sign::Negative}, {0, 2, Sign::Positive}, {1, 2, Sign::Positive}});
  const std::vector<int> label = {0, 0, 1};
  const auto ti = build_k_hop_ego_tree(g, 0, 2);
  const auto tj = build_k_hop_ego_tree(g, 1, 2);
  const auto tk = build_k_hop_ego_tree(g, 2, 2);
  ASSERT_EQ(rooted_signature(ti, label), rooted_signature(tj, label));
  EXPECT_NE(rooted_signature(ti, label), rooted_signature(tk, label));

  // Features assigned by position: one row per label class.
  const Matrix by_label = synth_features(2, 8, 3);
  Matrix x(3, 8);
  for (int v = 0; v < 3; ++v) x.row(v) = by_label.row(label[v]);
  const auto p = ModelParams::init(8, 8, 2, 11);
  const auto ei = forward(ti.tree, p, tree_features(ti, x));
  const auto ej = forward(tj.tree, p, tree_features(tj, x));
  EXPECT_LT((concat(ei).row(ti.root) - concat(ej).row(tj.root)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EgoTree, IsomorphicTreesGiveEqualRootsOnRandomGraphs) {
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto g = random_signed_graph(9, 0.25, 0.4, seed);
    std::vector<int> label(9);
    std::mt19937_64 rng(seed);
    for (auto& l : label) l = static_cast<int>(rng() % 2);
    const Matrix by_label = synth_features(2, 6, seed);
    Matrix x(9, 6);
    for (int v = 0; v < 9; ++v) x.row(v) = by_label.row(label[v]);
    const auto p = ModelParams::init(6, 6, 2, seed);
    std::map<std::string, Eigen::RowVectorXd> seen;
    for (NodeId r = 0; r < 9; ++r) {
      const auto t = build_k_hop_ego_tree(g, r, 2);
      const Eigen::RowVectorXd root = concat(forward(t.tree, p, tree_features(t, x))).row(t.root);
      const auto sig = rooted_signature(t, label);
      auto [it, fresh] = seen.emplace(sig, root);
      if (!fresh) {
        ++compared;
        EXPECT_LT((it->second - root).cwiseAbs().maxCoeff(), 1e-9) << "seed " << seed;
      }
    }
  }
  EXPECT_GT(compared, 20u);
}

namespace {

// Every node is strictly closer to each positive neighbour than to each
// negative neighbour, checked over `nodes`.
bool proper(const SignedGraph& g, const Matrix& z, std::span<const NodeId> nodes) {
  for (NodeId i : nodes) {
    for (NodeId j : g.neighbors(i, Sign::Positive)) {
      for (NodeId k : g.neighbors(i, Sign::Negative)) {
        if (!(distance(z, i, j) < distance(z, i, k))) return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST(ProperRepresentation, DeletingTheNegativeTriangleEdge) {
  // Unbalanced triangle on 0, 1, 2 (0-1 negative) next to a balanced
  // triangle that keeps both signs present after the deletion.
  std::vector<SignedEdge> edges = {{0, 1, Sign::Negative}, {0, 2, Sign::Positive}, {1, 2, Sign::Positive},
                                   {3, 4, Sign::Positive}, {4, 5, Sign::Negative}, {3, 5, Sign::Negative}};
  const SignedGraph before(6, edges);
  edges.erase(edges.begin());
  const SignedGraph after(6, edges);
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 300;
  cfg.input_dim = 8;
  cfg.embedding_dim = 8;
  // Positional features: the two ends of the negative edge look alike.
  Matrix x = synth_features(6, 8, 1);
  x.row(1) = x.row(0);
  const std::vector<NodeId> triangle_nodes = {0, 1, 2};

  const auto zb = concat(forward(before, train(before, cfg).params, x));
  EXPECT_LT(distance(zb, 0, 1), 1e-12);
  EXPECT_FALSE(proper(before, zb, triangle_nodes));

  const auto za = concat(forward(after, train(after, cfg).params, x));
  EXPECT_TRUE(proper(after, za, triangle_nodes));
  EXPECT_GT(distance(za, 0, 2), 0.0);
}

TEST(ProperRepresentation, DeletingTheNegativeEdgeIncreasesEndpointDistance) {
  std::vector<SignedEdge> edges = {{0, 1, Sign::Negative}, {0, 2, Sign::Positive}, {1, 2, Sign::Positive},
                                   {3, 4, Sign::Positive}, {4, 5, Sign::Negative}, {3, 5, Sign::Negative}};
  const SignedGraph before(6, edges);
  edges.erase(edges.begin());
  const SignedGraph after(6, edges);
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 300;
  cfg.input_dim = 8;
  cfg.embedding_dim = 8;
  const auto zb = concat(train(before, cfg).embeddings);
  const auto za = concat(train(after, cfg).embeddings);
  EXPECT_GT(distance(za, 0, 1), distance(zb, 0, 1));
}

TEST(Params, SaveLoadRoundTrip) {
  const auto p = ModelParams::init(5, 6, 3, 2);
  std::stringstream buf;
  save_params(buf, p);
  EXPECT_EQ(buf.str().rfind(std::string(kParamsMagic) + "\n", 0), 0u);
  const auto q = load_params(buf);
  ASSERT_EQ(q.layers(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(q.pos_weights[l], p.pos_weights[l]);
    EXPECT_EQ(q.neg_weights[l], p.neg_weights[l]);
  }
  EXPECT_EQ(q.classifier, p.classifier);
  std::stringstream bad("NOT-A-BLOB\n");
  EXPECT_THROW(load_params(bad), ParseError);
  std::stringstream truncated(buf.str().substr(0, 40));
  EXPECT_THROW(load_params(truncated), ParseError);
}

TEST(Embeddings, TextRoundTrip) {
  EmbeddingPair pair{synth_features(5, 3, 1), synth_features(5, 3, 2)};
  std::stringstream buf;
  write_embeddings(buf, concat(pair));
  const auto back = read_embeddings(buf);
  EXPECT_EQ(back.zpos, pair.zpos);
  EXPECT_EQ(back.zneg, pair.zneg);
  std::stringstream odd("0 1 2 3\n");
  EXPECT_THROW(read_embeddings(odd), ParseError);
}
