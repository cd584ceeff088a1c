#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudkit/config.hpp"
#include "fraudkit/eval.hpp"

namespace fraudkit {

// Published figures for this method on the public credit-card dataset,
// printed next to measured values. Agreement is not asserted.
struct ReferenceValues {
  static constexpr double dnn_accuracy = 0.9812;
  static constexpr double knn_auc = 0.9154;
  static constexpr double dnn_auc = 0.9402;
  static constexpr double tolerance = 0.03;
};

struct ModelReport {
  std::string model;  // "knn" or "dnn"
  eval::ConfusionMatrix confusion;
  eval::MetricsSummary metrics;
  double auc = 0.0;
  std::string predictions_file;  // relative to the output directory
  std::string roc_file;
  nlohmann::json details;  // model-specific extras
};

struct CellReport {
  std::string name;  // e.g. "enn", "oss", "enn_2" for a repeated method
  SamplerEntry sampler;
  ClassCounts before;  // rows the sampler saw
  ClassCounts after;
  std::map<std::string, std::size_t> removed_by_reason;
  std::size_t passes = 0;
  ClassCounts train_counts;
  ClassCounts test_counts;
  std::string audit_file;
  std::vector<ModelReport> models;
};

struct StageTiming {
  std::string stage;
  double seconds;
};

struct RunReport {
  ExperimentConfig config;
  std::size_t input_rows = 0;
  std::vector<std::string> input_features;
  ClassCounts input_counts;
  std::vector<std::string> model_features;
  ingest::ColumnStats scaling;
  std::vector<CellReport> cells;
  std::vector<StageTiming> timings;
};

// Runs load -> preprocess -> under-sample -> split -> KNN and DNN ->
// evaluation for every configured sampler and writes into output_dir:
//   report.json               everything below except timings; deterministic
//   timings.json              wall-clock seconds per stage
//   config.resolved.json      the fully defaulted configuration
//   audit_<cell>.csv          row_id,label,reason
//   predictions_<cell>_<model>.csv   row_id,truth,score,label
//   roc_<cell>_<model>.csv    threshold,fpr,tpr
//   model_<cell>.fknm         trained network
// A RUN_INCOMPLETE marker exists in output_dir until the run succeeds.
// Errors are rethrown as StageError naming the failing stage.
RunReport run_pipeline(const ExperimentConfig& cfg);

nlohmann::json to_json(const RunReport& r);

// Text table of a persisted report.json.
std::string format_report(const nlohmann::json& report);

struct PredictionDump {
  std::vector<RowId> row_ids;
  std::vector<Label> truth;
  std::vector<double> scores;
  std::vector<Label> labels;
};

void write_predictions_csv(const PredictionDump& p, const std::filesystem::path& path);
PredictionDump read_predictions_csv(const std::filesystem::path& path);

// Writes the ROC data of a model cell; refuses empty score lists.
eval::RocCurve emit_roc(const PredictionDump& p, const std::filesystem::path& path);

}  // namespace fraudkit
