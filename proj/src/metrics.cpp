#include "phishguard/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "phishguard/error.hpp"
#include "phishguard/learners.hpp"

namespace phishguard {

using Eigen::Index;

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(Errc::LengthMismatch, std::to_string(a) + " labels vs " + std::to_string(b) + " values");
  }
  if (a == 0) throw Error(Errc::EmptyInput, "no samples to evaluate");
}

void check_binary(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(Errc::InvalidArgument, "labels must be 0 or 1");
  }
}

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

// Descending-score order; std::stable_sort keeps input order among ties.
std::vector<std::size_t> descending(std::span<const double> scores) {
  for (double s : scores) {
    if (std::isnan(s)) throw Error(Errc::InvalidArgument, "score is NaN");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions) {
  check_pair(labels.size(), predictions.size());
  check_binary(labels);
  check_binary(predictions);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predictions[i] == 1 ? cm.tp : cm.fn) += 1;
    } else {
      (predictions[i] == 1 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

ClassificationScores prf1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(Errc::EmptyInput, "empty confusion matrix");
  ClassificationScores s;
  s.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  s.precision = ratio(cm.tp, cm.tp + cm.fp, s.degenerate);
  s.recall = ratio(cm.tp, cm.tp + cm.fn, s.degenerate);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  } else {
    s.f1 = 0.0;
    s.degenerate = true;
  }
  return s;
}

RocResult roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_pair(labels.size(), scores.size());
  check_binary(labels);
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(Errc::SingleClassInput, "ROC needs both classes");
  }

  const auto order = descending(scores);
  RocResult r;
  r.curve.fpr.push_back(0.0);
  r.curve.tpr.push_back(0.0);
  r.curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0;
  std::size_t fp = 0;
  double twice_area = 0.0;  // in units of (1/P)(1/N)
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::size_t tp_before = tp;
    const std::size_t fp_before = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
    }
    twice_area += static_cast<double>(fp - fp_before) * static_cast<double>(tp + tp_before);
    r.curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(negatives));
    r.curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    r.curve.thresholds.push_back(threshold);
  }
  r.auc = twice_area / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return r;
}

std::vector<PrPoint> pr_curve(std::span<const int> labels, std::span<const double> scores) {
  check_pair(labels.size(), scores.size());
  check_binary(labels);
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto order = descending(scores);
  std::vector<PrPoint> points;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      tp += labels[order[i]] == 1 ? 1 : 0;
      ++seen;
    }
    points.push_back({threshold,
                      positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0,
                      static_cast<double>(tp) / static_cast<double>(seen)});
  }
  return points;
}

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::Accuracy: return "accuracy";
    case Metric::Precision: return "precision";
    case Metric::Recall: return "recall";
    case Metric::F1: return "f1";
    case Metric::RocAuc: return "roc_auc";
  }
  return "unknown";
}

CvResult summarize(std::vector<double> scores) {
  CvResult r;
  r.scores = std::move(scores);
  if (r.scores.empty()) return r;
  const double n = static_cast<double>(r.scores.size());
  r.mean = std::accumulate(r.scores.begin(), r.scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : r.scores) ss += (s - r.mean) * (s - r.mean);
  r.stddev = std::sqrt(ss / n);
  return r;
}

MetricRow evaluate_scores(std::span<const int> labels, std::span<const double> scores) {
  std::vector<int> predicted(scores.size());
  std::transform(scores.begin(), scores.end(), predicted.begin(), predict_label);
  const auto s = prf1(confusion(labels, predicted));
  MetricRow row{s.accuracy, s.precision, s.recall, s.f1, std::numeric_limits<double>::quiet_NaN()};
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives > 0 && static_cast<std::size_t>(positives) < labels.size()) {
    row.auc = roc_auc(labels, scores).auc;
  }
  return row;
}

namespace {

// Scores of the held-out rows of every fold, each from the model trained on
// that fold's complement.
template <class PerFold>
void run_folds(const Trainer& trainer, const Dataset& ds, int k, std::uint64_t seed, PerFold&& per_fold) {
  const auto folds = stratified_folds(ds.labels, k, seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    try {
      const auto scorer = trainer(ds.subset(training_indices(folds, f)));
      std::vector<int> labels;
      std::vector<double> scores;
      for (auto i : folds[f]) {
        labels.push_back(ds.labels(i));
        scores.push_back(scorer(ds.features.row(i).transpose()));
      }
      per_fold(labels, scores);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.detail());
    }
  }
}

}  // namespace

CvResult cross_validate(const Trainer& trainer, const Dataset& ds, Metric metric, int k,
                        std::uint64_t seed) {
  std::vector<double> values;
  run_folds(trainer, ds, k, seed, [&](const std::vector<int>& labels, const std::vector<double>& scores) {
    if (metric == Metric::RocAuc) {
      values.push_back(roc_auc(labels, scores).auc);
      return;
    }
    const auto row = evaluate_scores(labels, scores);
    switch (metric) {
      case Metric::Accuracy: values.push_back(row.accuracy); break;
      case Metric::Precision: values.push_back(row.precision); break;
      case Metric::Recall: values.push_back(row.recall); break;
      case Metric::F1: values.push_back(row.f1); break;
      case Metric::RocAuc: break;
    }
  });
  return summarize(std::move(values));
}

CvReport cross_validate_report(const Trainer& trainer, const Dataset& ds, int k, std::uint64_t seed) {
  CvReport report;
  run_folds(trainer, ds, k, seed, [&](const std::vector<int>& labels, const std::vector<double>& scores) {
    report.folds.push_back(evaluate_scores(labels, scores));
  });
  std::vector<double> acc, prec, rec, f1, auc;
  for (const auto& r : report.folds) {
    acc.push_back(r.accuracy);
    prec.push_back(r.precision);
    rec.push_back(r.recall);
    f1.push_back(r.f1);
    if (!std::isnan(r.auc)) auc.push_back(r.auc);  // single-class folds have no AUC
  }
  report.accuracy = summarize(acc);
  report.precision = summarize(prec);
  report.recall = summarize(rec);
  report.f1 = summarize(f1);
  report.auc = summarize(auc);
  if (auc.empty()) report.auc.mean = std::numeric_limits<double>::quiet_NaN();
  return report;
}

std::string format_metrics_table(const std::vector<std::pair<std::string, MetricRow>>& rows) {
  std::size_t width = 5;
  for (const auto& [name, row] : rows) width = std::max(width, name.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %8s  %9s  %6s  %6s  %7s\n", static_cast<int>(width), "Model",
                "Accuracy", "Precision", "Recall", "F1", "ROC AUC");
  out += line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof line, "%-*s  %8.4f  %9.4f  %6.4f  %6.4f  %7.4f\n",
                  static_cast<int>(width), name.c_str(), r.accuracy, r.precision, r.recall, r.f1, r.auc);
    out += line;
  }
  return out;
}

std::string format_metrics_json(const std::vector<std::pair<std::string, MetricRow>>& rows) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& [name, r] : rows) {
    nlohmann::json auc = std::isnan(r.auc) ? nlohmann::json(nullptr) : nlohmann::json(r.auc);
    doc.push_back({{"model", name},
                   {"accuracy", r.accuracy},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1},
                   {"roc_auc", auc}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace phishguard
