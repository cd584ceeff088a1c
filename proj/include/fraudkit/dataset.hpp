#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace fraudkit {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowId = std::uint64_t;
using Label = std::uint8_t;

inline constexpr Label kGenuine = 0;
inline constexpr Label kFraud = 1;

// Feature rows with binary labels (1 = fraud, the minority class) and
// stable identifiers of the original rows.
//
// Invariants, checked on construction: one label and one id per row,
// labels in {0, 1}, all features finite, ids unique, one name per column.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(FeatureMatrix features, std::vector<Label> labels, std::vector<RowId> row_ids,
                 std::vector<std::string> feature_names);

  const FeatureMatrix& features() const noexcept { return features_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  const std::vector<RowId>& row_ids() const noexcept { return row_ids_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  bool empty() const noexcept { return labels_.empty(); }

  // Rows at the given positions, in the given order.
  LabeledDataset select(const std::vector<std::size_t>& positions) const;

 private:
  FeatureMatrix features_;
  std::vector<Label> labels_;
  std::vector<RowId> row_ids_;
  std::vector<std::string> feature_names_;
};

struct ClassCounts {
  std::size_t majority = 0;  // label 0
  std::size_t minority = 0;  // label 1
  bool operator==(const ClassCounts&) const = default;
};

ClassCounts class_counts(const LabeledDataset& d);

namespace ingest {

// Reads a comma-separated file whose header names the columns and whose
// last column is "Class". Quoted cells ("0", "V1") are unquoted. When
// `expected_schema` is non-empty the header must match it exactly.
LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& expected_schema = {});

// Writes `d` in the same layout load_csv reads, with round-trip precision.
void write_csv(const LabeledDataset& d, const std::filesystem::path& path);

enum class Scaling { none, zscore };
enum class FitScope { whole_dataset, train_only };

struct PreprocessConfig {
  std::set<std::string> drop_columns{"Time"};
  Scaling default_scaling = Scaling::zscore;
  std::map<std::string, Scaling> column_scaling;  // overrides default_scaling
  FitScope fit_scope = FitScope::whole_dataset;

  Scaling scaling_for(const std::string& column) const;
};

// Per-column mean and population standard deviation. Columns left
// unscaled carry mean 0 and std 1.
struct ColumnStats {
  std::vector<std::string> columns;
  std::vector<double> means;
  std::vector<double> stds;
};

// Drops columns, then z-scores the retained ones with `fit_stats` when
// given, otherwise with statistics fitted on `d`. Returns the transformed
// dataset together with the statistics that were applied.
std::pair<LabeledDataset, ColumnStats> preprocess(const LabeledDataset& d,
                                                  const PreprocessConfig& cfg,
                                                  const std::optional<ColumnStats>& fit_stats = {});

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct Split {
  LabeledDataset train;
  LabeledDataset test;
};

// Seeded train/test partition. Per class (or overall when not stratified)
// round(train_fraction * count) rows go to train, clamped so both sides
// get at least one row. Both sides keep the input row order.
Split stratified_split(const LabeledDataset& d, const SplitSpec& spec);

// Two isotropic unit-variance Gaussian clusters: majority centred at the
// origin, minority at `class_separation` along every axis. Rows are
// shuffled; features are named V1..Vdims.
LabeledDataset make_synthetic(std::size_t n_major, std::size_t n_minor, std::size_t dims,
                              double class_separation, std::uint64_t seed);

// Prepends a "Time" column holding the row position, matching the layout
// of the public credit-card transactions file.
LabeledDataset with_time_column(const LabeledDataset& d);

}  // namespace ingest
}  // namespace fraudkit
