#include "sigaug/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sigaug/error.hpp"
#include "sigaug/format.hpp"

namespace sigaug {

double auc(std::span<const double> scores, std::span<const Sign> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("auc: scores and labels differ in length");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(scores.size());
  std::size_t npos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw ArgumentError("auc: NaN score");
    const bool pos = labels[i] == Sign::Positive;
    npos += pos;
    items.push_back({scores[i], pos});
  }
  const std::size_t nneg = items.size() - npos;
  if (npos == 0 || nneg == 0) throw RefusalError("auc needs both positive and negative labels");

  // Sum of midranks of the positives.
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < items.size() && items[j].score == items[i].score) pos_in_group += items[j++].positive;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double p = static_cast<double>(npos);
  const double q = static_cast<double>(nneg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

namespace {

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

ClassificationMetrics classification_metrics(std::span<const Sign> predicted,
                                             std::span<const Sign> truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("prediction and truth lengths differ");
  if (predicted.empty()) throw ArgumentError("classification metrics need at least one sample");
  double tp = 0, fp = 0, fn = 0, tn = 0;  // with + as the reference class
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == Sign::Positive;
    const bool t = truth[i] == Sign::Positive;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }
  ClassificationMetrics m;
  m.pos_precision = ratio_or_zero(tp, tp + fp);
  m.pos_recall = ratio_or_zero(tp, tp + fn);
  m.pos_f1 = f1(m.pos_precision, m.pos_recall);
  m.neg_precision = ratio_or_zero(tn, tn + fn);
  m.neg_recall = ratio_or_zero(tn, tn + fp);
  m.neg_f1 = f1(m.neg_precision, m.neg_recall);
  m.f1_binary_avg = 0.5 * (m.pos_f1 + m.neg_f1);
  return m;
}

Predictions predict_test_edges(const Matrix& z, const Matrix& classifier,
                               std::span<const SignedEdge> test) {
  if (test.empty()) throw RefusalError("no test edges to score");
  if (classifier.cols() != 3 || classifier.rows() != 2 * z.cols()) {
    throw ArgumentError("classifier shape does not match embeddings");
  }
  Predictions out;
  out.scores.reserve(test.size());
  out.labels.reserve(test.size());
  for (const auto& e : test) {
    if (e.u >= z.rows() || e.v >= z.rows()) throw ArgumentError("test edge outside embedding range");
    const Eigen::RowVector3d logits =
        pair_feature(z, std::min(e.u, e.v), std::max(e.u, e.v)) * classifier;
    const double margin = logits(0) - logits(1);
    out.scores.push_back(1.0 / (1.0 + std::exp(-margin)));
    out.labels.push_back(e.sign);
  }
  return out;
}

Sign predicted_sign(double score) noexcept { return score >= 0.5 ? Sign::Positive : Sign::Negative; }

BoundaryDiagnostics boundary_diagnostics(const Matrix& classifier) {
  if (classifier.cols() < 2) throw ArgumentError("classifier needs + and - columns");
  BoundaryDiagnostics d;
  d.norm_pos = classifier.col(0).norm();
  d.norm_neg = classifier.col(1).norm();
  if (d.norm_neg > 0.0) {
    d.ratio = d.norm_pos / d.norm_neg;
  } else {
    d.ratio = d.norm_pos > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  return d;
}

std::string_view to_string(Augmentation a) { return a == Augmentation::None ? "none" : "sigaug"; }

std::optional<Augmentation> parse_augmentation(std::string_view text) {
  if (text == "none") return Augmentation::None;
  if (text == "sigaug") return Augmentation::Sigaug;
  return std::nullopt;
}

std::string_view to_string(Supervision s) {
  return s == Supervision::Augmented ? "augmented" : "original";
}

std::optional<Supervision> parse_supervision(std::string_view text) {
  if (text == "augmented") return Supervision::Augmented;
  if (text == "original") return Supervision::Original;
  return std::nullopt;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw ArgumentError("runs must be >= 1");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw ArgumentError("test fraction must lie in (0, 1)");
  }
  if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) {
    throw ArgumentError("subsample fraction must lie in (0, 1]");
  }
  validate(cfg.epr);
  validate(cfg.train);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("summary of an empty sample");
  Summary s;
  const auto n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  // Guard against rounding pushing the mean outside the sample range.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

namespace {

constexpr std::array<std::string_view, 14> kMetrics = {
    "auc",          "f1_binary_avg", "neg_precision", "neg_recall",     "neg_f1",
    "pos_f1",       "norm_pos",      "norm_neg",      "boundary_ratio", "thresholds_unmet",
    "kept_positive", "kept_negative", "discarded",    "test_overlap"};

double metric_value(const RunResult& r, std::string_view metric) {
  if (metric == "auc") return r.auc;
  if (metric == "f1_binary_avg") return r.metrics.f1_binary_avg;
  if (metric == "neg_precision") return r.metrics.neg_precision;
  if (metric == "neg_recall") return r.metrics.neg_recall;
  if (metric == "neg_f1") return r.metrics.neg_f1;
  if (metric == "pos_f1") return r.metrics.pos_f1;
  if (metric == "norm_pos") return r.boundary.norm_pos;
  if (metric == "norm_neg") return r.boundary.norm_neg;
  if (metric == "boundary_ratio") return r.boundary.ratio;
  if (metric == "thresholds_unmet") return r.thresholds_unmet ? 1.0 : 0.0;
  if (metric == "kept_positive") return static_cast<double>(r.kept_positive);
  if (metric == "kept_negative") return static_cast<double>(r.kept_negative);
  if (metric == "discarded") return static_cast<double>(r.discarded);
  if (metric == "test_overlap") return static_cast<double>(r.test_overlap);
  throw ArgumentError("unknown metric: " + std::string(metric));
}

struct FirstStage {
  EdgeSplit split;
  TrainResult model;
};

FirstStage first_stage(const SignedGraph& g, const ExperimentConfig& cfg, std::size_t run) {
  const std::uint64_t seed = cfg.base_seed + run;
  FirstStage s;
  s.split = split_edges(g, cfg.test_fraction, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  s.model = train(s.split.train, tc);
  return s;
}

RunResult finish_run(const ExperimentConfig& cfg, std::size_t run, const FirstStage& stage) {
  const std::uint64_t seed = cfg.base_seed + run;
  RunResult r;
  r.run = run;
  r.seed = seed;
  const TrainResult* model = &stage.model;
  TrainResult retrained;
  if (cfg.augmentation == Augmentation::Sigaug) {
    const auto aug = augment(stage.split.train, stage.model.embeddings, cfg.epr);
    r.thresholds_unmet = aug.thresholds_unmet;
    r.kept_positive = aug.log.kept_positive;
    r.kept_negative = aug.log.kept_negative;
    r.discarded = aug.log.entries.size() - aug.log.kept();
    r.test_overlap = count_test_overlap(aug.log, stage.split.test);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const SignedGraph& supervision =
        cfg.supervision == Supervision::Augmented ? aug.graph : stage.split.train;
    retrained = train(aug.graph, supervision, tc);
    model = &retrained;
  }
  const Matrix z = concat(model->embeddings);
  const auto pred = predict_test_edges(z, model->params.classifier, stage.split.test);
  r.auc = auc(pred.scores, pred.labels);
  std::vector<Sign> predicted(pred.scores.size());
  std::transform(pred.scores.begin(), pred.scores.end(), predicted.begin(), predicted_sign);
  r.metrics = classification_metrics(predicted, pred.labels);
  r.boundary = boundary_diagnostics(model->params.classifier);
  return r;
}

template <typename Fn>
auto with_run_context(std::size_t run, Fn&& fn) {
  try {
    return fn();
  } catch (const ArgumentError& e) {
    throw ArgumentError("run " + std::to_string(run) + ": " + e.what());
  } catch (const RefusalError& e) {
    throw RefusalError("run " + std::to_string(run) + ": " + e.what());
  }
}

SignedGraph prepare_graph(const SignedGraph& g, const ExperimentConfig& cfg) {
  if (cfg.subsample < 1.0) return subsample_edges(g, cfg.subsample, cfg.base_seed);
  return g;
}

MetricReport empty_report(const ExperimentConfig& cfg, const SignedGraph& g) {
  MetricReport report;
  report.augmentation = cfg.augmentation;
  report.nodes = g.num_nodes();
  report.edges = g.num_edges();
  report.subsample = cfg.subsample;
  return report;
}

SignedGraph load_dataset(const std::string& path) {
  return build_graph(load_edge_list_file(path, EdgeFormat::Rating));
}

}  // namespace

std::vector<double> MetricReport::values(std::string_view metric) const {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(metric_value(r, metric));
  return out;
}

Summary MetricReport::summary(std::string_view metric) const { return summarize(values(metric)); }

std::span<const std::string_view> report_metrics() { return kMetrics; }

MetricReport run_experiment(const ExperimentConfig& cfg, const SignedGraph& source) {
  validate(cfg);
  const SignedGraph g = prepare_graph(source, cfg);
  auto report = empty_report(cfg, g);
  for (std::size_t run = 0; run < static_cast<std::size_t>(cfg.runs); ++run) {
    report.runs.push_back(with_run_context(run, [&] {
      spdlog::debug("run {} seed {}", run, cfg.base_seed + run);
      return finish_run(cfg, run, first_stage(g, cfg, run));
    }));
  }
  return report;
}

MetricReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  return run_experiment(cfg, load_dataset(cfg.dataset));
}

void write_report_table(std::ostream& out, const MetricReport& report) {
  out << "# augmentation: " << to_string(report.augmentation) << '\n'
      << "# graph: " << report.nodes << " nodes, " << report.edges << " edges";
  if (report.subsample < 1.0) out << " (seeded edge subsample " << format_double(report.subsample) << ")";
  out << '\n'
      << "# auc: binary score softmax renormalised over {+, -}\n"
      << "# spread: sample standard deviation (n - 1)\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-18s", "metric");
  out << buf;
  for (const auto& r : report.runs) {
    std::snprintf(buf, sizeof buf, " %10s", ("run" + std::to_string(r.run)).c_str());
    out << buf;
  }
  out << "        mean ± std\n";
  for (auto metric : kMetrics) {
    std::snprintf(buf, sizeof buf, "%-18s", std::string(metric).c_str());
    out << buf;
    const auto vals = report.values(metric);
    for (double v : vals) {
      std::snprintf(buf, sizeof buf, " %10.4f", v);
      out << buf;
    }
    const auto s = summarize(vals);
    std::snprintf(buf, sizeof buf, "  %.4f ± %.4f", s.mean, s.std);
    out << buf << '\n';
  }
}

std::vector<ReportLine> report_lines(const MetricReport& report) {
  std::vector<ReportLine> lines;
  for (auto metric : kMetrics) {
    const auto vals = report.values(metric);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      lines.push_back({std::string(metric), std::to_string(report.runs[i].run), vals[i]});
    }
    const auto s = summarize(vals);
    lines.push_back({std::string(metric), "mean", s.mean});
    lines.push_back({std::string(metric), "std", s.std});
  }
  return lines;
}

void write_report_lines(std::ostream& out, const MetricReport& report) {
  out << "metric,run,value\n";
  for (const auto& l : report_lines(report)) {
    out << l.metric << ',' << l.run << ',' << format_double(l.value) << '\n';
  }
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& text, std::size_t line_no) {
  const auto v = parse_double(text);
  if (!v) throw ParseError(line_no, "not a number: '" + text + "'");
  return *v;
}

}  // namespace

std::vector<ReportLine> parse_report_lines(std::istream& in) {
  std::vector<ReportLine> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "metric,run,value") continue;
    const auto fields = split_commas(line);
    if (fields.size() != 3) throw ParseError(line_no, "expected metric,run,value");
    lines.push_back({fields[0], fields[1], parse_field(fields[2], line_no)});
  }
  return lines;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const SignedGraph& source,
                            const SweepGrid& grid, std::size_t cap) {
  if (grid.mu.empty() || grid.theta.empty() || grid.delta.empty()) {
    throw ArgumentError("sweep grids must be nonempty");
  }
  const std::size_t cells = grid.mu.size() * grid.theta.size() * grid.delta.size();
  if (cells > cap) {
    throw RefusalError("sweep has " + std::to_string(cells) + " cells, above the cap of " +
                       std::to_string(cap));
  }
  validate(cfg);
  for (double mu : grid.mu) {
    for (double theta : grid.theta) {
      for (double delta : grid.delta) validate(EPRConfig{theta, delta, mu, cfg.epr.eta});
    }
  }
  const SignedGraph g = prepare_graph(source, cfg);

  // The first-stage model depends only on the run seed, so it is shared by
  // every cell.
  std::vector<FirstStage> stages;
  stages.reserve(static_cast<std::size_t>(cfg.runs));
  for (std::size_t run = 0; run < static_cast<std::size_t>(cfg.runs); ++run) {
    stages.push_back(with_run_context(run, [&] { return first_stage(g, cfg, run); }));
  }

  std::vector<SweepRow> rows;
  rows.reserve(cells);
  for (double mu : grid.mu) {
    for (double theta : grid.theta) {
      for (double delta : grid.delta) {
        ExperimentConfig cell = cfg;
        cell.epr.mu = mu;
        cell.epr.theta_target = theta;
        cell.epr.delta_target = delta;
        std::vector<double> aucs;
        for (std::size_t run = 0; run < stages.size(); ++run) {
          aucs.push_back(with_run_context(run, [&] { return finish_run(cell, run, stages[run]); }).auc);
        }
        const auto s = summarize(aucs);
        rows.push_back({mu, theta, delta, s.mean, s.std});
        spdlog::info("sweep mu={} theta={} delta={} auc={:.4f}", mu, theta, delta, s.mean);
      }
    }
  }
  return rows;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const SweepGrid& grid, std::size_t cap) {
  validate(cfg);
  return sweep(cfg, load_dataset(cfg.dataset), grid, cap);
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "mu,theta,delta,mean_auc,std_auc\n";
  for (const auto& r : rows) {
    out << format_double(r.mu) << ',' << format_double(r.theta) << ',' << format_double(r.delta)
        << ',' << format_double(r.mean_auc) << ',' << format_double(r.std_auc) << '\n';
  }
}

std::vector<SweepRow> parse_sweep_csv(std::istream& in) {
  std::vector<SweepRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "mu,theta,delta,mean_auc,std_auc") continue;
    const auto f = split_commas(line);
    if (f.size() != 5) throw ParseError(line_no, "expected 5 comma-separated fields");
    rows.push_back({parse_field(f[0], line_no), parse_field(f[1], line_no), parse_field(f[2], line_no),
                    parse_field(f[3], line_no), parse_field(f[4], line_no)});
  }
  return rows;
}

}  // namespace sigaug
