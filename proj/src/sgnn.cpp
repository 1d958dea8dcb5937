#include "sigaug/sgnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Sparse>
#include <spdlog/spdlog.h>

#include "sigaug/error.hpp"
#include "sigaug/format.hpp"

namespace sigaug {

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor>;

std::size_t ModelParams::parameter_count() const {
  std::size_t count = static_cast<std::size_t>(classifier.size());
  for (const auto& w : pos_weights) count += static_cast<std::size_t>(w.size());
  for (const auto& w : neg_weights) count += static_cast<std::size_t>(w.size());
  return count;
}

ModelParams ModelParams::init(Eigen::Index input_dim, Eigen::Index embedding_dim,
                              std::size_t layers, std::uint64_t seed) {
  if (input_dim < 1) throw ArgumentError("input_dim must be positive");
  if (embedding_dim < 2 || embedding_dim % 2 != 0) {
    throw ArgumentError("embedding_dim must be a positive even number");
  }
  if (layers < 1) throw ArgumentError("at least one layer is required");
  std::mt19937_64 rng(seed);
  auto xavier = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    }
    return m;
  };
  const Eigen::Index half = embedding_dim / 2;
  ModelParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index in = l == 0 ? 2 * input_dim : 3 * half;
    p.pos_weights.push_back(xavier(in, half));
    p.neg_weights.push_back(xavier(in, half));
  }
  p.classifier = xavier(2 * embedding_dim, 3);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p;
  for (const auto& w : other.pos_weights) p.pos_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& w : other.neg_weights) p.neg_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  p.classifier = Matrix::Zero(other.classifier.rows(), other.classifier.cols());
  return p;
}

namespace {

template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
  for (auto& w : p.pos_weights) f(w);
  for (auto& w : p.neg_weights) f(w);
  f(p.classifier);
}

template <typename Params, typename F>
void for_each_tensor_pair(Params& a, const ModelParams& b, F&& f) {
  for (std::size_t l = 0; l < a.pos_weights.size(); ++l) f(a.pos_weights[l], b.pos_weights[l]);
  for (std::size_t l = 0; l < a.neg_weights.size(); ++l) f(a.neg_weights[l], b.neg_weights[l]);
  f(a.classifier, b.classifier);
}

}  // namespace

double& ModelParams::at(std::size_t flat_index) {
  double* found = nullptr;
  for_each_tensor(*this, [&](Matrix& m) {
    if (found) return;
    const auto size = static_cast<std::size_t>(m.size());
    if (flat_index < size) {
      found = m.data() + flat_index;
    } else {
      flat_index -= size;
    }
  });
  if (!found) throw ArgumentError("parameter index out of range");
  return *found;
}

double ModelParams::at(std::size_t flat_index) const {
  return const_cast<ModelParams&>(*this).at(flat_index);
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  if (!(cfg.lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  if (!(cfg.weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
  if (cfg.class_weights) {
    for (double w : *cfg.class_weights) {
      if (!(w > 0.0)) throw ArgumentError("class weights must be > 0");
    }
  }
  if (cfg.input_dim < 1) throw ArgumentError("input_dim must be >= 1");
  if (cfg.embedding_dim < 2 || cfg.embedding_dim % 2 != 0) {
    throw ArgumentError("embedding_dim must be a positive even number");
  }
  if (cfg.layers < 1) throw ArgumentError("layers must be >= 1");
}

Matrix synth_features(std::size_t num_nodes, Eigen::Index dim, std::uint64_t seed) {
  if (dim < 1) throw ArgumentError("feature dimension must be >= 1");
  const double a = std::sqrt(3.0 / static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix x(static_cast<Eigen::Index>(num_nodes), dim);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) x(r, c) = dist(rng);
  }
  return x;
}

namespace {

// Row-normalised neighbour-mean operator for one sign; empty rows stay zero.
SparseOp mean_operator(const SignedGraph& g, Sign sign) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Eigen::Triplet<double>> t;
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i, sign);
    if (nb.empty()) continue;
    const double w = 1.0 / static_cast<double>(nb.size());
    for (NodeId j : nb) t.emplace_back(i, j, w);
  }
  SparseOp op(n, n);
  op.setFromTriplets(t.begin(), t.end());
  return op;
}

struct ForwardCache {
  SparseOp pos_mean, neg_mean;
  std::vector<Matrix> pos_in, neg_in;
  std::vector<Matrix> pos_out, neg_out;
};

Matrix hcat(std::initializer_list<const Matrix*> blocks) {
  Eigen::Index cols = 0;
  for (auto* b : blocks) cols += b->cols();
  Matrix out((*blocks.begin())->rows(), cols);
  Eigen::Index at = 0;
  for (auto* b : blocks) {
    out.middleCols(at, b->cols()) = *b;
    at += b->cols();
  }
  return out;
}

void check_shapes(const SignedGraph& g, const ModelParams& params, const Matrix& features) {
  if (params.layers() == 0 || params.pos_weights.size() != params.neg_weights.size()) {
    throw ArgumentError("malformed model parameters");
  }
  if (features.rows() != static_cast<Eigen::Index>(g.num_nodes())) {
    throw ArgumentError("feature rows do not match node count");
  }
  const auto half = params.branch_dim();
  for (std::size_t l = 0; l < params.layers(); ++l) {
    const Eigen::Index in = l == 0 ? 2 * features.cols() : 3 * half;
    for (const auto* w : {&params.pos_weights[l], &params.neg_weights[l]}) {
      if (w->rows() != in || w->cols() != half) {
        throw ArgumentError("weight shape mismatch at layer " + std::to_string(l + 1));
      }
    }
  }
  if (params.classifier.rows() != 4 * half || params.classifier.cols() != 3) {
    throw ArgumentError("classifier shape mismatch");
  }
}

ForwardCache run_forward(const SignedGraph& g, const ModelParams& params, const Matrix& x) {
  check_shapes(g, params, x);
  ForwardCache c;
  c.pos_mean = mean_operator(g, Sign::Positive);
  c.neg_mean = mean_operator(g, Sign::Negative);

  const Matrix px = c.pos_mean * x;
  const Matrix qx = c.neg_mean * x;
  c.pos_in.push_back(hcat({&x, &px}));
  c.neg_in.push_back(hcat({&x, &qx}));
  c.pos_out.push_back((c.pos_in[0] * params.pos_weights[0]).array().tanh().matrix());
  c.neg_out.push_back((c.neg_in[0] * params.neg_weights[0]).array().tanh().matrix());

  for (std::size_t l = 1; l < params.layers(); ++l) {
    const Matrix& hp = c.pos_out.back();
    const Matrix& hn = c.neg_out.back();
    const Matrix p_hp = c.pos_mean * hp;
    const Matrix q_hn = c.neg_mean * hn;
    const Matrix p_hn = c.pos_mean * hn;
    const Matrix q_hp = c.neg_mean * hp;
    Matrix in_pos = hcat({&hp, &p_hp, &q_hn});
    Matrix in_neg = hcat({&hn, &p_hn, &q_hp});
    Matrix out_pos = (in_pos * params.pos_weights[l]).array().tanh().matrix();
    Matrix out_neg = (in_neg * params.neg_weights[l]).array().tanh().matrix();
    c.pos_in.push_back(std::move(in_pos));
    c.neg_in.push_back(std::move(in_neg));
    c.pos_out.push_back(std::move(out_pos));
    c.neg_out.push_back(std::move(out_neg));
  }
  return c;
}

}  // namespace

EmbeddingPair forward(const SignedGraph& g, const ModelParams& params, const Matrix& features) {
  auto cache = run_forward(g, params, features);
  return {std::move(cache.pos_out.back()), std::move(cache.neg_out.back())};
}

Matrix concat(const EmbeddingPair& pair) {
  if (pair.zpos.rows() != pair.zneg.rows()) throw ArgumentError("embedding row mismatch");
  Matrix z(pair.zpos.rows(), pair.zpos.cols() + pair.zneg.cols());
  z << pair.zpos, pair.zneg;
  return z;
}

Eigen::RowVectorXd pair_feature(const Matrix& z, NodeId a, NodeId b) {
  Eigen::RowVectorXd f(2 * z.cols());
  f << z.row(a), z.row(b);
  return f;
}

std::array<double, 3> inverse_frequency_weights(std::span<const PairSample> pairs) {
  std::array<std::size_t, 3> counts{};
  for (const auto& s : pairs) ++counts[static_cast<std::size_t>(s.cls)];
  std::array<double, 3> w{1.0, 1.0, 1.0};
  const auto total = static_cast<double>(pairs.size());
  for (std::size_t c = 0; c < 3; ++c) {
    if (counts[c] > 0) w[c] = total / (3.0 * static_cast<double>(counts[c]));
  }
  return w;
}

namespace {

// Loss value with optional gradients w.r.t. Z and the classifier.
double loss_terms(const Matrix& z, const LossSamples& samples, const ModelParams& params,
                  const TrainConfig& cfg, Matrix* dz, ModelParams* grad) {
  const Eigen::Index d = z.cols();
  if (params.classifier.rows() != 2 * d) throw ArgumentError("classifier/embedding mismatch");
  const auto weights = cfg.class_weights.value_or(inverse_frequency_weights(samples.pairs));
  double value = 0.0;

  if (!samples.pairs.empty()) {
    const double scale = 1.0 / static_cast<double>(samples.pairs.size());
    for (const auto& s : samples.pairs) {
      const auto f = pair_feature(z, s.i, s.j);
      const Eigen::RowVector3d logits = f * params.classifier;
      const double mx = logits.maxCoeff();
      const Eigen::RowVector3d e = (logits.array() - mx).exp().matrix();
      const double denom = e.sum();
      const auto cls = static_cast<Eigen::Index>(s.cls);
      const double w = weights[static_cast<std::size_t>(cls)];
      value -= scale * w * (logits(cls) - mx - std::log(denom));
      if (dz || grad) {
        Eigen::RowVector3d dlogits = e / denom;
        dlogits(cls) -= 1.0;
        dlogits *= scale * w;
        if (grad) grad->classifier.noalias() += f.transpose() * dlogits;
        if (dz) {
          const Eigen::RowVectorXd df = dlogits * params.classifier.transpose();
          dz->row(s.i) += df.head(d);
          dz->row(s.j) += df.tail(d);
        }
      }
    }
  }

  // sign = +1: push ||zi - zj||^2 below ||zi - zk||^2; sign = -1: the reverse.
  auto hinge = [&](const std::vector<HingeTriple>& triples, double sign, const char* name) {
    if (triples.empty()) {
      if (cfg.lambda > 0.0) spdlog::warn("no {} hinge triples; term contributes 0", name);
      return;
    }
    const double c = cfg.lambda / static_cast<double>(triples.size());
    for (const auto& t : triples) {
      const Eigen::RowVectorXd dij = z.row(t.i) - z.row(t.j);
      const Eigen::RowVectorXd dik = z.row(t.i) - z.row(t.k);
      const double margin = sign * (dij.squaredNorm() - dik.squaredNorm());
      if (margin <= 0.0) continue;
      value += c * margin;
      if (dz) {
        dz->row(t.i) += c * sign * 2.0 * (dij - dik);
        dz->row(t.j) -= c * sign * 2.0 * dij;
        dz->row(t.k) += c * sign * 2.0 * dik;
      }
    }
  };
  hinge(samples.positive_triples, 1.0, "positive");
  hinge(samples.negative_triples, -1.0, "negative");

  double reg = 0.0;
  for_each_tensor(params, [&](const Matrix& m) { reg += m.squaredNorm(); });
  value += cfg.weight_decay * reg;
  if (grad) {
    for_each_tensor_pair(*grad, params,
                         [&](Matrix& g, const Matrix& p) { g += 2.0 * cfg.weight_decay * p; });
  }
  return value;
}

}  // namespace

double loss(const Matrix& z, const LossSamples& samples, const ModelParams& params,
            const TrainConfig& cfg) {
  return loss_terms(z, samples, params, cfg, nullptr, nullptr);
}

LossGradient loss_and_gradient(const SignedGraph& g, const Matrix& features,
                               const ModelParams& params, const LossSamples& samples,
                               const TrainConfig& cfg) {
  const auto cache = run_forward(g, params, features);
  const Eigen::Index half = params.branch_dim();
  Matrix z(cache.pos_out.back().rows(), 2 * half);
  z << cache.pos_out.back(), cache.neg_out.back();

  LossGradient out{0.0, ModelParams::zeros_like(params)};
  Matrix dz = Matrix::Zero(z.rows(), z.cols());
  out.value = loss_terms(z, samples, params, cfg, &dz, &out.gradient);

  Matrix dhp = dz.leftCols(half);
  Matrix dhn = dz.rightCols(half);
  for (std::size_t l = params.layers(); l-- > 0;) {
    const Matrix dsp = (dhp.array() * (1.0 - cache.pos_out[l].array().square())).matrix();
    const Matrix dsn = (dhn.array() * (1.0 - cache.neg_out[l].array().square())).matrix();
    out.gradient.pos_weights[l].noalias() += cache.pos_in[l].transpose() * dsp;
    out.gradient.neg_weights[l].noalias() += cache.neg_in[l].transpose() * dsn;
    if (l == 0) break;

    const Matrix din_p = dsp * params.pos_weights[l].transpose();
    const Matrix din_n = dsn * params.neg_weights[l].transpose();
    // in_pos = [hp | P hp | Q hn], in_neg = [hn | P hn | Q hp]
    dhp = din_p.leftCols(half);
    dhp.noalias() += cache.pos_mean.transpose() * din_p.middleCols(half, half);
    dhp.noalias() += cache.neg_mean.transpose() * din_n.rightCols(half);
    dhn = din_n.leftCols(half);
    dhn.noalias() += cache.pos_mean.transpose() * din_n.middleCols(half, half);
    dhn.noalias() += cache.neg_mean.transpose() * din_p.rightCols(half);
  }
  return out;
}

namespace {

std::optional<NodeId> draw_non_neighbor(const SignedGraph& g, NodeId i, std::mt19937_64& rng) {
  const auto n = g.num_nodes();
  if (n < 2 || g.degree(i) + 1 >= n) return std::nullopt;
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const NodeId k = pick(rng);
    if (k != i && !g.has_edge(i, k)) return k;
  }
  return std::nullopt;
}

}  // namespace

LossSamples draw_samples(const SignedGraph& supervision, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LossSamples s;
  const auto n = supervision.num_nodes();
  s.pairs.reserve(2 * supervision.num_edges());
  for (const auto& e : supervision.edges()) {
    s.pairs.push_back({e.u, e.v, e.sign == Sign::Positive ? EdgeClass::Positive : EdgeClass::Negative});
  }
  const std::size_t max_pairs = n * (n - (n > 0 ? 1 : 0)) / 2;
  if (n >= 2 && supervision.num_edges() < max_pairs) {
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
    std::size_t drawn = 0;
    for (std::size_t attempt = 0; drawn < supervision.num_edges() && attempt < 1000 * (supervision.num_edges() + 1);
         ++attempt) {
      const NodeId a = pick(rng);
      const NodeId b = pick(rng);
      if (a == b || supervision.has_edge(a, b)) continue;
      s.pairs.push_back({std::min(a, b), std::max(a, b), EdgeClass::None});
      ++drawn;
    }
  }
  for (const auto& e : supervision.edges()) {
    const auto k = draw_non_neighbor(supervision, e.u, rng);
    if (!k) continue;
    auto& dst = e.sign == Sign::Positive ? s.positive_triples : s.negative_triples;
    dst.push_back({e.u, e.v, *k});
  }
  return s;
}

TrainResult train(const SignedGraph& structure, const SignedGraph& supervision,
                  const TrainConfig& cfg) {
  validate(cfg);
  if (structure.num_nodes() != supervision.num_nodes()) {
    throw ArgumentError("structure and supervision graphs differ in node count");
  }
  if (supervision.num_positive() == 0) throw RefusalError("training graph has no positive edges");
  if (supervision.num_negative() == 0) throw RefusalError("training graph has no negative edges");

  TrainResult result;
  result.features = synth_features(structure.num_nodes(), cfg.input_dim, cfg.seed);
  result.params = ModelParams::init(cfg.input_dim, cfg.embedding_dim,
                                    static_cast<std::size_t>(cfg.layers), cfg.seed + 1);

  // Adam on the full batch.
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  auto m = ModelParams::zeros_like(result.params);
  auto v = ModelParams::zeros_like(result.params);
  std::mt19937_64 sample_seeds(cfg.seed + 2);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto samples = draw_samples(supervision, sample_seeds());
    const auto lg = loss_and_gradient(structure, result.features, result.params, samples, cfg);
    result.loss_trace.push_back(lg.value);
    const double c1 = 1.0 - std::pow(beta1, epoch);
    const double c2 = 1.0 - std::pow(beta2, epoch);
    auto step = [&](Matrix& p, Matrix& mm, Matrix& vv, const Matrix& g) {
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
      p.array() -= cfg.learning_rate * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < result.params.layers(); ++l) {
      step(result.params.pos_weights[l], m.pos_weights[l], v.pos_weights[l],
           lg.gradient.pos_weights[l]);
      step(result.params.neg_weights[l], m.neg_weights[l], v.neg_weights[l],
           lg.gradient.neg_weights[l]);
    }
    step(result.params.classifier, m.classifier, v.classifier, lg.gradient.classifier);
  }
  result.embeddings = forward(structure, result.params, result.features);
  return result;
}

TrainResult train(const SignedGraph& g, const TrainConfig& cfg) { return train(g, g, cfg); }

double gradient_check(const SignedGraph& g, const TrainConfig& cfg, double epsilon,
                      std::size_t probes) {
  validate(cfg);
  if (g.num_nodes() > 20 || cfg.embedding_dim > 8) {
    throw ArgumentError("gradient_check is limited to n <= 20 and d <= 8");
  }
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4)) throw ArgumentError("epsilon must lie in [1e-6, 1e-4]");

  const Matrix x = synth_features(g.num_nodes(), cfg.input_dim, cfg.seed);
  const auto params = ModelParams::init(cfg.input_dim, cfg.embedding_dim,
                                        static_cast<std::size_t>(cfg.layers), cfg.seed + 1);
  const auto samples = draw_samples(g, cfg.seed + 2);
  const auto analytic = loss_and_gradient(g, x, params, samples, cfg);

  auto value_at = [&](const ModelParams& p) {
    const auto pair = forward(g, p, x);
    return loss(concat(pair), samples, p, cfg);
  };

  const auto count = params.parameter_count();
  std::vector<std::size_t> indices(count);
  for (std::size_t i = 0; i < count; ++i) indices[i] = i;
  std::mt19937_64 rng(cfg.seed + 3);
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(std::min(count, probes));

  double worst = 0.0;
  for (auto idx : indices) {
    auto plus = params;
    auto minus = params;
    plus.at(idx) += epsilon;
    minus.at(idx) -= epsilon;
    const double fd = (value_at(plus) - value_at(minus)) / (2.0 * epsilon);
    const double an = analytic.gradient.at(idx);
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

EgoTree build_k_hop_ego_tree(const SignedGraph& g, NodeId root, int k) {
  if (k < 1) throw ArgumentError("ego tree depth must be >= 1");
  if (root >= g.num_nodes()) throw ArgumentError("root out of range");
  EgoTree t;
  t.origin.push_back(root);
  t.level.push_back(0);
  std::vector<SignedEdge> edges;
  std::vector<NodeId> current{0};
  for (int l = 0; l < k; ++l) {
    std::vector<NodeId> next;
    for (NodeId node : current) {
      for (Sign s : {Sign::Positive, Sign::Negative}) {
        for (NodeId nb : g.neighbors(t.origin[node], s)) {
          const auto copy = static_cast<NodeId>(t.origin.size());
          t.origin.push_back(nb);
          t.level.push_back(l + 1);
          edges.push_back({node, copy, s});
          next.push_back(copy);
        }
      }
    }
    current = std::move(next);
  }
  t.tree = SignedGraph(t.origin.size(), std::move(edges));
  return t;
}

Matrix tree_features(const EgoTree& tree, const Matrix& features) {
  Matrix out(static_cast<Eigen::Index>(tree.origin.size()), features.cols());
  for (std::size_t i = 0; i < tree.origin.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = features.row(tree.origin[i]);
  }
  return out;
}

namespace {

std::string signature_of(const EgoTree& t, NodeId node, std::span<const int> label) {
  std::vector<std::string> children;
  for (Sign s : {Sign::Positive, Sign::Negative}) {
    for (NodeId nb : t.tree.neighbors(node, s)) {
      if (t.level[nb] != t.level[node] + 1) continue;
      children.push_back((s == Sign::Positive ? "+" : "-") + signature_of(t, nb, label));
    }
  }
  std::sort(children.begin(), children.end());
  std::string out = "(" + std::to_string(label[t.origin[node]]);
  for (const auto& c : children) out += c;
  return out + ")";
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError(0, "truncated parameter blob");
  return value;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

Matrix read_matrix(std::istream& in) {
  const auto rows = read_pod<std::uint64_t>(in);
  const auto cols = read_pod<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw ParseError(0, "implausible matrix shape");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!in) throw ParseError(0, "truncated parameter blob");
  return m;
}

}  // namespace

std::string rooted_signature(const EgoTree& tree, std::span<const int> node_label) {
  return signature_of(tree, tree.root, node_label);
}

void save_params(std::ostream& out, const ModelParams& params) {
  out.write(kParamsMagic.data(), static_cast<std::streamsize>(kParamsMagic.size()));
  out.put('\n');
  write_pod<std::uint64_t>(out, params.layers());
  for (const auto& w : params.pos_weights) write_matrix(out, w);
  for (const auto& w : params.neg_weights) write_matrix(out, w);
  write_matrix(out, params.classifier);
}

ModelParams load_params(std::istream& in) {
  std::string magic(kParamsMagic.size() + 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic.substr(0, kParamsMagic.size()) != kParamsMagic || magic.back() != '\n') {
    throw ParseError(1, "missing SIGAUG-PARAMS-1 header");
  }
  const auto layers = read_pod<std::uint64_t>(in);
  if (layers == 0 || layers > 64) throw ParseError(0, "implausible layer count");
  ModelParams p;
  for (std::uint64_t l = 0; l < layers; ++l) p.pos_weights.push_back(read_matrix(in));
  for (std::uint64_t l = 0; l < layers; ++l) p.neg_weights.push_back(read_matrix(in));
  p.classifier = read_matrix(in);
  return p;
}

void write_embeddings(std::ostream& out, const Matrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < z.cols(); ++c) out << ' ' << format_double(z(r, c));
    out << '\n';
  }
}

EmbeddingPair read_embeddings(std::istream& in) {
  std::map<long long, std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tok;
    std::vector<std::string> toks;
    while (fields >> tok) toks.push_back(tok);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() < 3) throw ParseError(line_no, "embedding row needs an id and >= 2 values");
    if (width == 0) width = toks.size() - 1;
    if (toks.size() - 1 != width) throw ParseError(line_no, "inconsistent embedding width");
    const auto id = parse_double(toks[0]);
    if (!id || *id < 0 || *id != std::floor(*id)) throw ParseError(line_no, "bad node id");
    std::vector<double> values;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const auto v = parse_double(toks[i]);
      if (!v) throw ParseError(line_no, "non-numeric embedding value");
      values.push_back(*v);
    }
    if (!rows.emplace(static_cast<long long>(*id), std::move(values)).second) {
      throw ParseError(line_no, "duplicate node id");
    }
  }
  if (width % 2 != 0) throw ParseError(line_no, "embedding width must be even");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto half = static_cast<Eigen::Index>(width / 2);
  EmbeddingPair pair{Matrix(n, half), Matrix(n, half)};
  Eigen::Index expected = 0;
  for (const auto& [id, values] : rows) {
    if (id != expected) throw ParseError(0, "embedding ids must be dense 0..n-1");
    for (Eigen::Index c = 0; c < half; ++c) {
      pair.zpos(expected, c) = values[static_cast<std::size_t>(c)];
      pair.zneg(expected, c) = values[static_cast<std::size_t>(c + half)];
    }
    ++expected;
  }
  return pair;
}

}  // namespace sigaug
