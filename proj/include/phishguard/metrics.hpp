#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "phishguard/dataset.hpp"

namespace phishguard {

// Class 1 (phishing) is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions);

struct ClassificationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some ratio had a zero denominator and was reported as 0
};

ClassificationScores prf1(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<double> thresholds;  // +inf first, then each distinct score descending
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

// Samples sharing a score cross the threshold together, so ties contribute a
// diagonal segment and the trapezoid area gives them half credit.
RocResult roc_auc(std::span<const int> labels, std::span<const double> scores);

struct PrPoint {
  double threshold;
  double recall;
  double precision;
};
// One point per distinct score, descending; plot data only.
std::vector<PrPoint> pr_curve(std::span<const int> labels, std::span<const double> scores);

enum class Metric { Accuracy, Precision, Recall, F1, RocAuc };
std::string_view metric_name(Metric m) noexcept;

using Scorer = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;
using Trainer = std::function<Scorer(const Dataset&)>;

struct CvResult {
  std::vector<double> scores;
  double mean = 0.0;
  double stddev = 0.0;  // population deviation over folds
};

CvResult summarize(std::vector<double> scores);

// Trains on each fold complement and scores the held-out fold. Trainer and
// metric errors are rethrown with the fold index prepended.
CvResult cross_validate(const Trainer& trainer, const Dataset& ds, Metric metric, int k,
                        std::uint64_t seed);

struct MetricRow {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
};

struct CvReport {
  std::vector<MetricRow> folds;
  CvResult accuracy, precision, recall, f1, auc;
  MetricRow mean() const { return {accuracy.mean, precision.mean, recall.mean, f1.mean, auc.mean}; }
};

// All five metrics from one training pass per fold.
CvReport cross_validate_report(const Trainer& trainer, const Dataset& ds, int k, std::uint64_t seed);

MetricRow evaluate_scores(std::span<const int> labels, std::span<const double> scores);

// Columns: Model, Accuracy, Precision, Recall, F1, ROC AUC.
std::string format_metrics_table(const std::vector<std::pair<std::string, MetricRow>>& rows);
std::string format_metrics_json(const std::vector<std::pair<std::string, MetricRow>>& rows);

}  // namespace phishguard
