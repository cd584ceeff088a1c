#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string_view>
#include <unordered_set>

#include "fraudkit/dataset.hpp"
#include "fraudkit/error.hpp"
#include "fraudkit/rng.hpp"

namespace fraudkit {

LabeledDataset::LabeledDataset(FeatureMatrix features, std::vector<Label> labels,
                               std::vector<RowId> row_ids, std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      row_ids_(std::move(row_ids)),
      feature_names_(std::move(feature_names)) {
  if (static_cast<std::size_t>(features_.rows()) != labels_.size() ||
      labels_.size() != row_ids_.size()) {
    throw Error("dataset: features, labels and row ids differ in length");
  }
  if (static_cast<std::size_t>(features_.cols()) != feature_names_.size()) {
    throw Error("dataset: " + std::to_string(features_.cols()) + " columns but " +
                std::to_string(feature_names_.size()) + " feature names");
  }
  for (Label y : labels_) {
    if (y > 1) throw Error("dataset: label outside {0, 1}");
  }
  if (!features_.allFinite()) throw Error("dataset: non-finite feature value");
  std::unordered_set<RowId> seen;
  seen.reserve(row_ids_.size());
  for (RowId id : row_ids_) {
    if (!seen.insert(id).second) throw Error("dataset: duplicate row id " + std::to_string(id));
  }
}

LabeledDataset LabeledDataset::select(const std::vector<std::size_t>& positions) const {
  FeatureMatrix f(static_cast<Eigen::Index>(positions.size()), features_.cols());
  std::vector<Label> y;
  std::vector<RowId> ids;
  y.reserve(positions.size());
  ids.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto p = positions[i];
    if (p >= rows()) throw Error("dataset: row position out of range");
    f.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(p));
    y.push_back(labels_[p]);
    ids.push_back(row_ids_[p]);
  }
  return LabeledDataset(std::move(f), std::move(y), std::move(ids), feature_names_);
}

ClassCounts class_counts(const LabeledDataset& d) {
  ClassCounts c;
  for (Label y : d.labels()) {
    if (y == kFraud) {
      ++c.minority;
    } else {
      ++c.majority;
    }
  }
  return c;
}

namespace ingest {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& expected_schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row", 1);
  std::vector<std::string> header;
  for (auto cell : split_cells(line)) header.emplace_back(cell);
  if (!expected_schema.empty() && header != expected_schema) {
    throw ParseError(path.string() + ": header does not match the expected schema", 1);
  }
  if (header.size() < 2 || header.back() != "Class") {
    throw ParseError(path.string() + ": last column must be \"Class\"", 1);
  }
  const std::size_t dims = header.size() - 1;
  std::vector<std::string> names(header.begin(), header.end() - 1);

  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ": expected " + std::to_string(header.size()) +
                           " cells, found " + std::to_string(cells.size()),
                       line_no);
    }
    for (std::size_t j = 0; j < dims; ++j) {
      double v = 0.0;
      const auto cell = cells[j];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw ParseError(path.string() + ": non-numeric value '" + std::string(cell) +
                             "' in column " + names[j],
                         line_no);
      }
      if (!std::isfinite(v)) {
        throw ParseError(path.string() + ": non-finite value in column " + names[j], line_no);
      }
      values.push_back(v);
    }
    const auto cls = cells.back();
    if (cls == "0") {
      labels.push_back(kGenuine);
    } else if (cls == "1") {
      labels.push_back(kFraud);
    } else {
      throw ParseError(path.string() + ": label '" + std::string(cls) + "' outside {0,1}", line_no);
    }
  }

  const auto n = static_cast<Eigen::Index>(labels.size());
  FeatureMatrix features = Eigen::Map<FeatureMatrix>(values.data(), n, static_cast<Eigen::Index>(dims));
  std::vector<RowId> ids(labels.size());
  std::iota(ids.begin(), ids.end(), RowId{0});
  return LabeledDataset(std::move(features), std::move(labels), std::move(ids), std::move(names));
}

void write_csv(const LabeledDataset& d, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot write " + path.string());
  for (const auto& name : d.feature_names()) std::fprintf(f, "%s,", name.c_str());
  std::fprintf(f, "Class\n");
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.dims(); ++j) {
      std::fprintf(f, "%.17g,", d.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    std::fprintf(f, "%d\n", static_cast<int>(d.labels()[i]));
  }
  if (std::fclose(f) != 0) throw Error("error writing " + path.string());
}

Scaling PreprocessConfig::scaling_for(const std::string& column) const {
  const auto it = column_scaling.find(column);
  return it == column_scaling.end() ? default_scaling : it->second;
}

std::pair<LabeledDataset, ColumnStats> preprocess(const LabeledDataset& d,
                                                  const PreprocessConfig& cfg,
                                                  const std::optional<ColumnStats>& fit_stats) {
  const auto& names = d.feature_names();
  for (const auto& col : cfg.drop_columns) {
    if (std::find(names.begin(), names.end(), col) == names.end()) {
      throw Error("preprocess: drop column '" + col + "' not present");
    }
  }
  std::vector<Eigen::Index> keep;
  std::vector<std::string> kept_names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!cfg.drop_columns.contains(names[j])) {
      keep.push_back(static_cast<Eigen::Index>(j));
      kept_names.push_back(names[j]);
    }
  }
  if (fit_stats && fit_stats->columns != kept_names) {
    throw Error("preprocess: supplied statistics do not match the retained columns");
  }

  const auto n = d.features().rows();
  FeatureMatrix out(n, static_cast<Eigen::Index>(keep.size()));
  ColumnStats stats;
  stats.columns = kept_names;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto col = d.features().col(keep[c]);
    const auto idx = static_cast<Eigen::Index>(c);
    double mean = 0.0;
    double std = 1.0;
    if (cfg.scaling_for(kept_names[c]) == Scaling::zscore) {
      if (fit_stats) {
        mean = fit_stats->means[c];
        std = fit_stats->stds[c];
      } else {
        if (n == 0) throw Error("preprocess: cannot fit statistics on an empty dataset");
        mean = col.mean();
        std = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n));
      }
      if (!(std > 0.0)) throw Error("preprocess: zero-variance column '" + kept_names[c] + "'");
      out.col(idx) = (col.array() - mean) / std;
    } else {
      out.col(idx) = col;
    }
    stats.means.push_back(mean);
    stats.stds.push_back(std);
  }
  return {LabeledDataset(std::move(out), d.labels(), d.row_ids(), std::move(kept_names)),
          std::move(stats)};
}

Split stratified_split(const LabeledDataset& d, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error("split: train_fraction must lie in (0, 1)");
  }
  Rng rng(spec.seed);
  std::vector<char> in_train(d.rows(), 0);
  auto assign = [&](std::vector<std::size_t> group) {
    const auto count = group.size();
    auto take = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(count)));
    take = std::clamp<std::size_t>(take, 1, count - 1);
    rng.shuffle(group);
    for (std::size_t i = 0; i < take; ++i) in_train[group[i]] = 1;
  };
  if (spec.stratified) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < d.rows(); ++i) by_class[d.labels()[i]].push_back(i);
    for (int c = 0; c < 2; ++c) {
      if (by_class[c].size() < 2) {
        throw Error("split: class " + std::to_string(c) + " has " +
                    std::to_string(by_class[c].size()) + " rows; stratification needs at least 2");
      }
    }
    assign(std::move(by_class[0]));
    assign(std::move(by_class[1]));
  } else {
    if (d.rows() < 2) throw Error("split: need at least 2 rows");
    std::vector<std::size_t> all(d.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    assign(std::move(all));
  }
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < d.rows(); ++i) (in_train[i] ? train : test).push_back(i);
  return {d.select(train), d.select(test)};
}

LabeledDataset make_synthetic(std::size_t n_major, std::size_t n_minor, std::size_t dims,
                              double class_separation, std::uint64_t seed) {
  if (n_major < 1 || n_minor < 1 || dims < 1) {
    throw Error("make_synthetic: counts and dims must be at least 1");
  }
  Rng rng(seed);
  const std::size_t n = n_major + n_minor;
  std::vector<Label> labels(n, kGenuine);
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(n_major), labels.end(), kFraud);
  rng.shuffle(labels);

  FeatureMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double offset = labels[static_cast<std::size_t>(i)] == kFraud ? class_separation : 0.0;
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = offset + rng.normal();
  }
  std::vector<RowId> ids(n);
  std::iota(ids.begin(), ids.end(), RowId{0});
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= dims; ++j) names.push_back("V" + std::to_string(j));
  return LabeledDataset(std::move(f), std::move(labels), std::move(ids), std::move(names));
}

LabeledDataset with_time_column(const LabeledDataset& d) {
  FeatureMatrix f(d.features().rows(), d.features().cols() + 1);
  for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, 0) = static_cast<double>(i);
  f.rightCols(d.features().cols()) = d.features();
  std::vector<std::string> names{"Time"};
  names.insert(names.end(), d.feature_names().begin(), d.feature_names().end());
  return LabeledDataset(std::move(f), d.labels(), d.row_ids(), std::move(names));
}

}  // namespace ingest
}  // namespace fraudkit
