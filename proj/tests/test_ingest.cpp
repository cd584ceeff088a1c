#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fraudkit/dataset.hpp"
#include "fraudkit/error.hpp"
#include "fraudkit/rng.hpp"

using namespace fraudkit;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
  const auto path = fs::temp_directory_path() / ("fraudkit_ingest_" + name);
  std::ofstream(path) << body;
  return path;
}

LabeledDataset column_dataset(std::vector<double> values, std::string name = "a") {
  FeatureMatrix f(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) f(static_cast<Eigen::Index>(i), 0) = values[i];
  std::vector<Label> y(values.size(), 0);
  y.back() = 1;
  std::vector<RowId> ids(values.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return LabeledDataset(std::move(f), std::move(y), std::move(ids), {std::move(name)});
}

}  // namespace

TEST_CASE("load_csv parses a minimal file") {
  const auto path = write_temp("min.csv", "a,b,Class\n1,2,0\n3,4,1\n");
  const auto d = ingest::load_csv(path);
  CHECK(d.rows() == 2);
  CHECK(d.labels() == std::vector<Label>{0, 1});
  CHECK(d.row_ids() == std::vector<RowId>{0, 1});
  CHECK(d.feature_names() == std::vector<std::string>{"a", "b"});
  CHECK(d.features()(1, 0) == 3.0);
  CHECK(d.features()(1, 1) == 4.0);
}

TEST_CASE("load_csv accepts the quoted layout of the public transactions file") {
  const auto path = write_temp("quoted.csv", "\"Time\",\"V1\",\"Amount\",\"Class\"\r\n0,-1.5,149.62,\"0\"\r\n1,2e-3,2.69,\"1\"\r\n");
  const auto d = ingest::load_csv(path, {"Time", "V1", "Amount", "Class"});
  CHECK(d.rows() == 2);
  CHECK(d.features()(1, 1) == doctest::Approx(0.002));
  CHECK(d.labels()[1] == 1);
}

TEST_CASE("load_csv errors name the offending line") {
  SUBCASE("NaN cell") {
    const auto path = write_temp("nan.csv", "a,b,Class\n1,2,0\nNaN,4,1\n");
    try {
      ingest::load_csv(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("non-numeric cell") {
    const auto path = write_temp("text.csv", "a,Class\nabc,0\n");
    CHECK_THROWS_AS(ingest::load_csv(path), ParseError);
  }
  SUBCASE("infinite cell") {
    const auto path = write_temp("inf.csv", "a,Class\ninf,0\n");
    CHECK_THROWS_AS(ingest::load_csv(path), ParseError);
  }
  SUBCASE("label outside {0,1}") {
    const auto path = write_temp("label.csv", "a,Class\n1,2\n");
    try {
      ingest::load_csv(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("wrong cell count") {
    const auto path = write_temp("short.csv", "a,b,Class\n1,0\n");
    CHECK_THROWS_AS(ingest::load_csv(path), ParseError);
  }
}

TEST_CASE("load_csv rejects missing files and header mismatches") {
  CHECK_THROWS_AS(ingest::load_csv("/nonexistent/fraudkit.csv"), Error);
  const auto path = write_temp("hdr.csv", "a,b,Class\n1,2,0\n");
  CHECK_THROWS_AS(ingest::load_csv(path, {"a", "c", "Class"}), ParseError);
  const auto nolabel = write_temp("nolabel.csv", "a,b,Label\n1,2,0\n");
  CHECK_THROWS_AS(ingest::load_csv(nolabel), ParseError);
}

TEST_CASE("class_counts matches a line-by-line recount") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::ostringstream body;
    body << "x,Class\n";
    const auto n = 1 + rng.below(200);
    for (std::uint64_t i = 0; i < n; ++i) body << rng.normal() << ',' << (rng.uniform() < 0.2 ? 1 : 0) << '\n';
    const auto path = write_temp("recount.csv", body.str());

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    ClassCounts expected;
    while (std::getline(in, line)) (line.back() == '1' ? expected.minority : expected.majority)++;
    CHECK(class_counts(ingest::load_csv(path)) == expected);
  }
  CHECK(class_counts(LabeledDataset()) == ClassCounts{0, 0});
}

TEST_CASE("write_csv output reloads to the same values") {
  const auto d = ingest::make_synthetic(40, 7, 3, 1.5, 3);
  const auto path = fs::temp_directory_path() / "fraudkit_ingest_roundtrip.csv";
  ingest::write_csv(d, path);
  const auto back = ingest::load_csv(path);
  CHECK(back.features() == d.features());
  CHECK(back.labels() == d.labels());
  CHECK(back.feature_names() == d.feature_names());
}

TEST_CASE("preprocess z-scores with the population std") {
  const auto [out, stats] = ingest::preprocess(column_dataset({1.0, 3.0}), {.drop_columns = {}});
  CHECK(out.features()(0, 0) == doctest::Approx(-1.0));
  CHECK(out.features()(1, 0) == doctest::Approx(1.0));
  CHECK(stats.means == std::vector<double>{2.0});
  CHECK(stats.stds == std::vector<double>{1.0});
}

TEST_CASE("preprocess with no scaling and no drops is the identity") {
  const auto d = ingest::make_synthetic(30, 5, 4, 2.0, 9);
  ingest::PreprocessConfig cfg{.drop_columns = {}, .default_scaling = ingest::Scaling::none};
  const auto [out, stats] = ingest::preprocess(d, cfg);
  CHECK(out.features() == d.features());
  CHECK(out.labels() == d.labels());
  CHECK(out.row_ids() == d.row_ids());
}

TEST_CASE("preprocess drops Time by default and keeps the rest") {
  const auto d = ingest::with_time_column(ingest::make_synthetic(30, 5, 29, 2.0, 9));
  const auto [out, stats] = ingest::preprocess(d, {});
  CHECK(out.dims() == 29);
  CHECK(std::find(out.feature_names().begin(), out.feature_names().end(), "Time") == out.feature_names().end());
  CHECK(out.row_ids() == d.row_ids());
}

TEST_CASE("preprocess errors") {
  SUBCASE("zero variance names the column") {
    try {
      ingest::preprocess(column_dataset({2.0, 2.0, 2.0}, "Amount"), {.drop_columns = {}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("Amount") != std::string::npos);
    }
  }
  SUBCASE("missing drop column") {
    CHECK_THROWS_AS(ingest::preprocess(column_dataset({1.0, 2.0}), {}), Error);
  }
  SUBCASE("statistics for other columns") {
    ingest::ColumnStats wrong{{"zzz"}, {0.0}, {1.0}};
    CHECK_THROWS_AS(ingest::preprocess(column_dataset({1.0, 2.0}), {.drop_columns = {}}, wrong), Error);
  }
}

TEST_CASE("preprocess applies supplied statistics unchanged") {
  ingest::ColumnStats stats{{"a"}, {10.0}, {2.0}};
  const auto [out, applied] = ingest::preprocess(column_dataset({12.0, 8.0}), {.drop_columns = {}}, stats);
  CHECK(out.features()(0, 0) == 1.0);
  CHECK(out.features()(1, 0) == -1.0);
  CHECK(applied.means == stats.means);
}

TEST_CASE("preprocess honours per-column scaling overrides") {
  const auto d = ingest::make_synthetic(30, 5, 2, 2.0, 9);
  ingest::PreprocessConfig cfg{.drop_columns = {}};
  cfg.column_scaling["V2"] = ingest::Scaling::none;
  const auto [out, stats] = ingest::preprocess(d, cfg);
  CHECK(out.features().col(1) == d.features().col(1));
  CHECK(stats.stds[1] == 1.0);
}

TEST_CASE("z-scored columns have mean 0 and std 1 when fitted on the same rows") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = ingest::make_synthetic(20 + rng.below(200), 3 + rng.below(20), 1 + rng.below(6),
                                          rng.uniform() * 5.0, rng.next());
    const auto [out, stats] = ingest::preprocess(d, {.drop_columns = {}});
    for (Eigen::Index j = 0; j < out.features().cols(); ++j) {
      const auto col = out.features().col(j);
      const double mean = col.mean();
      const double std = std::sqrt((col.array() - mean).square().mean());
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(std - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("stratified_split keeps exact per-class proportions") {
  const auto d = ingest::make_synthetic(100, 10, 2, 3.0, 1);
  const auto split = ingest::stratified_split(d, {.train_fraction = 0.8, .seed = 4});
  CHECK(class_counts(split.train) == ClassCounts{80, 8});
  CHECK(class_counts(split.test) == ClassCounts{20, 2});

  const auto again = ingest::stratified_split(d, {.train_fraction = 0.8, .seed = 4});
  CHECK(again.train.row_ids() == split.train.row_ids());
  CHECK(again.test.row_ids() == split.test.row_ids());
}

TEST_CASE("stratified_split partitions the input") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = ingest::make_synthetic(2 + rng.below(300), 2 + rng.below(40), 2, 1.0, rng.next());
    const double frac = 0.05 + 0.9 * rng.uniform();
    const bool stratified = rng.uniform() < 0.7;
    const auto s = ingest::stratified_split(d, {.train_fraction = frac, .seed = rng.next(), .stratified = stratified});
    std::vector<RowId> all = s.train.row_ids();
    all.insert(all.end(), s.test.row_ids().begin(), s.test.row_ids().end());
    std::sort(all.begin(), all.end());
    CHECK(all == d.row_ids());
    const auto total = class_counts(d);
    const auto tr = class_counts(s.train);
    const auto te = class_counts(s.test);
    CHECK(tr.majority + te.majority == total.majority);
    CHECK(tr.minority + te.minority == total.minority);
  }
}

TEST_CASE("stratified_split preconditions") {
  FeatureMatrix f(4, 1);
  f << 1, 2, 3, 4;
  const LabeledDataset only_zero(f, {0, 0, 0, 0}, {0, 1, 2, 3}, {"a"});
  CHECK_THROWS_AS(ingest::stratified_split(only_zero, {}), Error);
  CHECK_NOTHROW(ingest::stratified_split(only_zero, {.stratified = false}));
  CHECK_THROWS_AS(ingest::stratified_split(only_zero, {.train_fraction = 1.0, .stratified = false}), Error);
}

TEST_CASE("make_synthetic") {
  const auto d = ingest::make_synthetic(1000, 100, 2, 3.0, 7);
  CHECK(d.rows() == 1100);
  CHECK(class_counts(d) == ClassCounts{1000, 100});

  const auto again = ingest::make_synthetic(1000, 100, 2, 3.0, 7);
  CHECK(again.features() == d.features());
  CHECK(again.labels() == d.labels());

  // Minority mean sits at the separation on every axis.
  Eigen::RowVectorXd minority_mean = Eigen::RowVectorXd::Zero(2);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (d.labels()[i]) minority_mean += d.features().row(static_cast<Eigen::Index>(i));
  }
  minority_mean /= 100.0;
  CHECK(minority_mean(0) == doctest::Approx(3.0).epsilon(0.1));

  CHECK_THROWS_AS(ingest::make_synthetic(0, 1, 1, 1.0, 0), Error);
  CHECK_THROWS_AS(ingest::make_synthetic(1, 1, 0, 1.0, 0), Error);
}

TEST_CASE("make_synthetic with zero separation draws both classes from one distribution") {
  const auto d = ingest::make_synthetic(4000, 4000, 1, 0.0, 2);
  double sums[2] = {0, 0};
  for (std::size_t i = 0; i < d.rows(); ++i) sums[d.labels()[i]] += d.features()(static_cast<Eigen::Index>(i), 0);
  CHECK(std::abs(sums[0] / 4000 - sums[1] / 4000) < 0.1);
}

TEST_CASE("LabeledDataset invariants") {
  FeatureMatrix f(2, 1);
  f << 1, 2;
  CHECK_THROWS_AS(LabeledDataset(f, {0}, {0, 1}, {"a"}), Error);
  CHECK_THROWS_AS(LabeledDataset(f, {0, 2}, {0, 1}, {"a"}), Error);
  CHECK_THROWS_AS(LabeledDataset(f, {0, 1}, {5, 5}, {"a"}), Error);
  CHECK_THROWS_AS(LabeledDataset(f, {0, 1}, {0, 1}, {"a", "b"}), Error);
  f(0, 0) = std::nan("");
  CHECK_THROWS_AS(LabeledDataset(f, {0, 1}, {0, 1}, {"a"}), Error);
}

TEST_CASE("public credit-card file, when supplied") {
  const char* path = std::getenv("FRAUDKIT_KAGGLE_CSV");
  if (!path || !fs::exists(path)) {
    MESSAGE("FRAUDKIT_KAGGLE_CSV not set; skipping the full-dataset checks");
    return;
  }
  const auto d = ingest::load_csv(path);
  CHECK(d.rows() == 284807);
  CHECK(class_counts(d) == ClassCounts{284315, 492});
  const auto [out, stats] = ingest::preprocess(d, {});
  CHECK(out.dims() == 29);
}
