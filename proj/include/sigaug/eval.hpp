#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigaug/augment.hpp"
#include "sigaug/graph.hpp"
#include "sigaug/sgnn.hpp"

namespace sigaug {

// Mann-Whitney AUC: P(score of a positive > score of a negative), ties 0.5.
// Throws RefusalError unless both classes are present.
double auc(std::span<const double> scores, std::span<const Sign> labels);

struct ClassificationMetrics {
  double f1_binary_avg = 0.0;
  double pos_precision = 0.0;
  double pos_recall = 0.0;
  double pos_f1 = 0.0;
  double neg_precision = 0.0;
  double neg_recall = 0.0;
  double neg_f1 = 0.0;
};

// Per-class precision / recall / F1 with 0/0 = 0; f1_binary_avg is the
// unweighted mean of the two F1 scores.
ClassificationMetrics classification_metrics(std::span<const Sign> predicted,
                                             std::span<const Sign> truth);

struct Predictions {
  std::vector<double> scores;  // P(+ | {+, -})
  std::vector<Sign> labels;    // ground truth
};

// Softmax over the + and - logits only: sigmoid(l+ - l-).
Predictions predict_test_edges(const Matrix& z, const Matrix& classifier,
                               std::span<const SignedEdge> test);

// Scores at or above one half predict +.
Sign predicted_sign(double score) noexcept;

struct BoundaryDiagnostics {
  double norm_pos = 0.0;
  double norm_neg = 0.0;
  double ratio = 0.0;  // +inf when norm_neg is 0 and norm_pos is not
};

BoundaryDiagnostics boundary_diagnostics(const Matrix& classifier);

enum class Augmentation { None, Sigaug };

std::string_view to_string(Augmentation a);
std::optional<Augmentation> parse_augmentation(std::string_view text);

// Which graph the second-stage loss is taken on when augmenting.
enum class Supervision { Augmented, Original };

std::string_view to_string(Supervision s);
std::optional<Supervision> parse_supervision(std::string_view text);

struct ExperimentConfig {
  std::string dataset;
  Augmentation augmentation = Augmentation::None;
  Supervision supervision = Supervision::Original;
  EPRConfig epr;
  TrainConfig train;
  int runs = 5;
  std::uint64_t base_seed = 0;
  double test_fraction = 0.2;
  double subsample = 1.0;  // seeded edge subsample applied once before the runs

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

void validate(const ExperimentConfig& cfg);

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  ClassificationMetrics metrics;
  BoundaryDiagnostics boundary;
  // Augmentation bookkeeping; zero for augmentation=none.
  bool thresholds_unmet = false;
  std::size_t kept_positive = 0;
  std::size_t kept_negative = 0;
  std::size_t discarded = 0;
  std::size_t test_overlap = 0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(std::span<const double> values);

struct MetricReport {
  Augmentation augmentation = Augmentation::None;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double subsample = 1.0;
  std::vector<RunResult> runs;

  std::vector<double> values(std::string_view metric) const;
  Summary summary(std::string_view metric) const;
};

// Metric names in report order.
std::span<const std::string_view> report_metrics();

MetricReport run_experiment(const ExperimentConfig& cfg);
MetricReport run_experiment(const ExperimentConfig& cfg, const SignedGraph& g);

void write_report_table(std::ostream& out, const MetricReport& report);

struct ReportLine {
  std::string metric;
  std::string run;  // run index, "mean" or "std"
  double value = 0.0;

  friend bool operator==(const ReportLine&, const ReportLine&) = default;
};

std::vector<ReportLine> report_lines(const MetricReport& report);
// `metric,run,value` lines with shortest round-trip doubles.
void write_report_lines(std::ostream& out, const MetricReport& report);
// Throws ParseError.
std::vector<ReportLine> parse_report_lines(std::istream& in);

struct SweepGrid {
  std::vector<double> mu;
  std::vector<double> theta;
  std::vector<double> delta;

  friend bool operator==(const SweepGrid&, const SweepGrid&) = default;
};

struct SweepRow {
  double mu = 0.0;
  double theta = 0.0;
  double delta = 0.0;
  double mean_auc = 0.0;
  double std_auc = 0.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

inline constexpr std::size_t kDefaultSweepCap = 125;

// Cartesian product in mu-major, then theta, then delta order. Each cell is a
// run_experiment with cfg's other settings.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const SweepGrid& grid,
                            std::size_t cap = kDefaultSweepCap);
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const SignedGraph& g,
                            const SweepGrid& grid, std::size_t cap = kDefaultSweepCap);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
std::vector<SweepRow> parse_sweep_csv(std::istream& in);

}  // namespace sigaug
