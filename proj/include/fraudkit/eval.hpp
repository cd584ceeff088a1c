#pragma once

#include <filesystem>
#include <vector>

#include "fraudkit/dataset.hpp"

namespace fraudkit::eval {

// Positive class is fraud (label 1).
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Precision, recall and F1 are 0 whenever their denominator is 0.
struct MetricsSummary {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RocPoint {
  double threshold;  // predict 1 iff score >= threshold; the first point uses +inf
  double fpr;
  double tpr;
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
};

ConfusionMatrix confusion(const std::vector<Label>& y_true, const std::vector<Label>& y_pred);
MetricsSummary summarize(const ConfusionMatrix& cm);

// One point per distinct score, scanned from the highest score down,
// after a leading +inf threshold at (0, 0).
RocCurve roc_curve(const std::vector<Label>& y_true, const std::vector<double>& scores);

// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

// threshold,fpr,tpr with round-trip precision.
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
RocCurve read_roc_csv(const std::filesystem::path& path);

}  // namespace fraudkit::eval
