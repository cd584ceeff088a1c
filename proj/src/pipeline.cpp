#include "fraudkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <iomanip>
#include <sstream>

#include "fraudkit/error.hpp"
#include "fraudkit/neighbors.hpp"
#include "fraudkit/net.hpp"

namespace fraudkit {

using nlohmann::json;
namespace fs = std::filesystem;

void write_predictions_csv(const PredictionDump& p, const fs::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot write " + path.string());
  std::fprintf(f, "row_id,truth,score,label\n");
  for (std::size_t i = 0; i < p.row_ids.size(); ++i) {
    std::fprintf(f, "%llu,%d,%.17g,%d\n", static_cast<unsigned long long>(p.row_ids[i]),
                 static_cast<int>(p.truth[i]), p.scores[i], static_cast<int>(p.labels[i]));
  }
  if (std::fclose(f) != 0) throw Error("error writing " + path.string());
}

PredictionDump read_predictions_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "row_id,truth,score,label") throw ParseError(path.string() + ": bad predictions header", 1);
  PredictionDump p;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::stringstream ss(line);
    std::string cell[4];
    for (auto& c : cell) std::getline(ss, c, ',');
    try {
      const int truth = std::stoi(cell[1]);
      const int label = std::stoi(cell[3]);
      if ((truth != 0 && truth != 1) || (label != 0 && label != 1)) throw Error("label");
      p.row_ids.push_back(std::stoull(cell[0]));
      p.truth.push_back(static_cast<Label>(truth));
      p.scores.push_back(std::stod(cell[2]));
      p.labels.push_back(static_cast<Label>(label));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": malformed predictions row", line_no);
    }
  }
  return p;
}

eval::RocCurve emit_roc(const PredictionDump& p, const fs::path& path) {
  if (p.scores.empty()) throw Error("emit_roc: no scores to plot");
  auto curve = eval::roc_curve(p.truth, p.scores);
  eval::write_roc_csv(curve, path);
  return curve;
}

namespace {

json counts_json(const ClassCounts& c) { return {{"majority", c.majority}, {"minority", c.minority}}; }

json confusion_json(const eval::ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

json metrics_json(const eval::MetricsSummary& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

json reference_json(double measured, double reference) {
  return {{"measured", measured},
          {"reference", reference},
          {"difference", measured - reference},
          {"within_tolerance", std::abs(measured - reference) <= ReferenceValues::tolerance}};
}

std::string cell_name(const std::vector<CellReport>& done, resample::Method m) {
  std::string base = resample::to_string(m);
  std::transform(base.begin(), base.end(), base.begin(), [](unsigned char c) { return std::tolower(c); });
  std::size_t same = 0;
  for (const auto& c : done) {
    if (c.sampler.sampler.method == m) ++same;
  }
  return same == 0 ? base : base + "_" + std::to_string(same + 1);
}

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <typename F>
  auto stage(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      sink_.push_back({name, dt.count()});
    };
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record();
      } else {
        auto result = body();
        record();
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

 private:
  std::vector<StageTiming>& sink_;
};

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error("error writing " + path.string());
}

ModelReport evaluate(const std::string& model, const PredictionDump& dump, const fs::path& out_dir,
                     const std::string& cell) {
  ModelReport r;
  r.model = model;
  r.confusion = eval::confusion(dump.truth, dump.labels);
  r.metrics = eval::summarize(r.confusion);
  r.predictions_file = "predictions_" + cell + "_" + model + ".csv";
  r.roc_file = "roc_" + cell + "_" + model + ".csv";
  write_predictions_csv(dump, out_dir / r.predictions_file);
  r.auc = eval::auc(emit_roc(dump, out_dir / r.roc_file));
  return r;
}

json architecture_json(const std::vector<net::LayerSpec>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    if (l.kind == net::LayerKind::dense) {
      arr.push_back({{"dense", l.units}, {"activation", net::to_string(l.activation)}});
    } else {
      arr.push_back({{"dropout", l.rate}});
    }
  }
  return arr;
}

}  // namespace

RunReport run_pipeline(const ExperimentConfig& cfg) {
  RunReport report;
  report.config = cfg;
  Stopwatch sw(report.timings);
  const fs::path out_dir = cfg.output_dir;
  const fs::path marker = out_dir / "RUN_INCOMPLETE";

  sw.stage("output", [&] {
    fs::create_directories(out_dir);
    std::ofstream(marker) << "run started\n";
    if (!fs::exists(marker)) throw Error("output directory " + out_dir.string() + " is not writable");
    write_json(to_json(cfg), out_dir / "config.resolved.json");
  });

  try {
    const LabeledDataset raw = sw.stage("load", [&] { return ingest::load_csv(cfg.data_path); });
    report.input_rows = raw.rows();
    report.input_features = raw.feature_names();
    report.input_counts = class_counts(raw);

    // The set every sampler sees, and for train_only resampling the fixed test set.
    LabeledDataset pool;
    LabeledDataset fixed_test;
    sw.stage("preprocess", [&] {
      if (cfg.resample_scope == ResampleScope::before_split) {
        auto [d, stats] = ingest::preprocess(raw, cfg.preprocess);
        pool = std::move(d);
        report.scaling = std::move(stats);
      } else if (cfg.preprocess.fit_scope == ingest::FitScope::whole_dataset) {
        auto [d, stats] = ingest::preprocess(raw, cfg.preprocess);
        auto split = ingest::stratified_split(d, cfg.split);
        pool = std::move(split.train);
        fixed_test = std::move(split.test);
        report.scaling = std::move(stats);
      } else {
        auto split = ingest::stratified_split(raw, cfg.split);
        auto [train, stats] = ingest::preprocess(split.train, cfg.preprocess);
        fixed_test = ingest::preprocess(split.test, cfg.preprocess, stats).first;
        pool = std::move(train);
        report.scaling = std::move(stats);
      }
    });
    report.model_features = pool.feature_names();

    // One leave-one-out neighbour pass over the pool serves every sampler.
    std::optional<resample::NeighborTable> table;
    std::size_t need = 0;
    for (const auto& e : cfg.samplers) need = std::max(need, resample::neighbor_need(e.sampler));
    const auto pool_counts = class_counts(pool);
    if (need > 0 && need < pool.rows() && pool_counts.majority > 0 && pool_counts.minority > 0) {
      table = sw.stage("neighbors", [&] { return resample::neighbor_table(pool, need, cfg.index_strategy); });
    }

    for (std::size_t i = 0; i < cfg.samplers.size(); ++i) {
      const auto& entry = cfg.samplers[i];
      CellReport cell;
      cell.name = cell_name(report.cells, entry.sampler.method);
      cell.sampler = entry;
      cell.before = class_counts(pool);

      const auto outcome = sw.stage("sample:" + cell.name, [&] {
        return resample::run_sampler(pool, entry.sampler, entry.ratio_seed, table ? &*table : nullptr);
      });
      cell.after = class_counts(outcome.kept);
      cell.passes = outcome.passes;
      for (const auto& r : outcome.removed) ++cell.removed_by_reason[resample::to_string(r.reason)];
      cell.audit_file = "audit_" + cell.name + ".csv";
      resample::write_audit_csv(outcome, out_dir / cell.audit_file);

      const auto split = sw.stage("split:" + cell.name, [&] {
        if (cfg.resample_scope == ResampleScope::before_split) {
          return ingest::stratified_split(outcome.kept, cfg.split);
        }
        return ingest::Split{outcome.kept, fixed_test};
      });
      cell.train_counts = class_counts(split.train);
      cell.test_counts = class_counts(split.test);
      const auto& test = split.test;

      cell.models.push_back(sw.stage("knn:" + cell.name, [&] {
        const neighbors::KnnModel knn(split.train, cfg.knn_k, cfg.index_strategy);
        const auto preds = neighbors::knn_classify_all(knn, test.features());
        PredictionDump dump{test.row_ids(), test.labels(), {}, {}};
        for (const auto& p : preds) {
          dump.scores.push_back(p.score);
          dump.labels.push_back(p.label);
        }
        auto m = evaluate("knn", dump, out_dir, cell.name);
        m.details = {{"k", cfg.knn_k}, {"index", knn.index().uses_tree() ? "tree" : "brute"}};
        return m;
      }));

      cell.models.push_back(sw.stage("dnn:" + cell.name, [&] {
        const std::uint64_t base = cfg.dnn_seed + 3 * i;
        const auto layers = net::default_architecture(split.train.dims());
        net::NetworkModel model(split.train.dims(), layers, base, base + 1);
        net::TrainConfig tc = cfg.train;
        tc.shuffle_seed = base + 2;
        const auto history = net::train(model, split.train, tc);
        const auto preds = net::predict(model, test.features(), tc.classify_threshold);
        const std::string model_file = "model_" + cell.name + ".fknm";
        net::save_model(model, out_dir / model_file);
        auto m = evaluate("dnn", PredictionDump{test.row_ids(), test.labels(), preds.scores, preds.labels},
                          out_dir, cell.name);
        m.details = {
            {"architecture", architecture_json(layers)},
            {"parameters", model.parameter_count()},
            {"loss", "binary_cross_entropy"},
            {"optimizer", to_string(tc.optimizer)},
            {"learning_rate", tc.learning_rate},
            {"epochs", tc.epochs},
            {"batch_size", tc.batch_size},
            {"threshold", tc.classify_threshold},
            {"init_seed", base},
            {"dropout_seed", base + 1},
            {"shuffle_seed", base + 2},
            {"first_epoch_loss", history.front().loss},
            {"final_loss", history.back().loss},
            {"final_train_accuracy", history.back().accuracy},
            {"model_file", model_file},
        };
        return m;
      }));
      report.cells.push_back(std::move(cell));
    }

    sw.stage("report", [&] { write_json(to_json(report), out_dir / "report.json"); });
  } catch (const std::exception& e) {
    std::ofstream(marker) << "run failed: " << e.what() << '\n';
    throw;
  }

  json timings = json::array();
  for (const auto& t : report.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  write_json(timings, out_dir / "timings.json");
  fs::remove(marker);
  return report;
}

json to_json(const RunReport& r) {
  json config = to_json(r.config);
  config.erase("output_dir");  // keeps reports from different directories comparable

  json cells = json::array();
  for (const auto& c : r.cells) {
    json models = json::object();
    for (const auto& m : c.models) {
      json entry = {
          {"confusion", confusion_json(m.confusion)},
          {"metrics", metrics_json(m.metrics)},
          {"auc", m.auc},
          {"predictions_file", m.predictions_file},
          {"roc_file", m.roc_file},
          {"details", m.details},
      };
      if (m.model == "dnn") {
        entry["reference"] = {{"accuracy", reference_json(m.metrics.accuracy, ReferenceValues::dnn_accuracy)},
                              {"auc", reference_json(m.auc, ReferenceValues::dnn_auc)}};
      } else {
        entry["reference"] = {{"auc", reference_json(m.auc, ReferenceValues::knn_auc)}};
      }
      models[m.model] = entry;
    }
    const double ratio = c.after.minority == 0
                             ? 0.0
                             : static_cast<double>(c.after.majority) / static_cast<double>(c.after.minority);
    cells.push_back({
        {"name", c.name},
        {"sampler", resample::to_string(c.sampler.sampler.method)},
        {"oss_order", resample::to_string(c.sampler.sampler.oss_order)},
        {"counts_before", counts_json(c.before)},
        {"counts_after", counts_json(c.after)},
        {"majority_per_minority_after", ratio},
        {"ratio_step_applied", c.removed_by_reason.contains("ratio")},
        {"removed_by_reason", c.removed_by_reason},
        {"passes", c.passes},
        {"train_counts", counts_json(c.train_counts)},
        {"test_counts", counts_json(c.test_counts)},
        {"audit_file", c.audit_file},
        {"models", models},
    });
  }
  return {
      {"format", "fraudkit-report/1"},
      {"status", "complete"},
      {"config", config},
      {"input", {{"rows", r.input_rows}, {"features", r.input_features}, {"class_counts", counts_json(r.input_counts)}}},
      {"preprocess",
       {{"fit_scope", to_string(r.config.preprocess.fit_scope)},
        {"columns", r.scaling.columns},
        {"means", r.scaling.means},
        {"stds", r.scaling.stds}}},
      {"reference_tolerance", ReferenceValues::tolerance},
      {"cells", cells},
  };
}

std::string format_report(const json& report) {
  std::ostringstream out;
  const auto& cfg = report.at("config");
  out << "data: " << cfg.at("data_path").get<std::string>() << "  rows: " << report.at("input").at("rows")
      << "  (majority " << report.at("input").at("class_counts").at("majority") << ", minority "
      << report.at("input").at("class_counts").at("minority") << ")\n";
  out << "master_seed: " << cfg.at("master_seed") << "  resample_scope: "
      << cfg.at("resample_scope").get<std::string>() << "  fit_scope: "
      << report.at("preprocess").at("fit_scope").get<std::string>() << "\n\n";

  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  out << std::left << std::setw(10) << "cell" << std::setw(6) << "model" << std::right << std::setw(14)
      << "maj/min" << std::setw(9) << "acc%" << std::setw(9) << "prec%" << std::setw(9) << "rec%"
      << std::setw(9) << "f1%" << std::setw(9) << "auc%" << std::setw(11) << "ref acc%" << std::setw(11)
      << "ref auc%" << '\n';
  for (const auto& cell : report.at("cells")) {
    const auto& after = cell.at("counts_after");
    const std::string counts = std::to_string(after.at("majority").get<std::size_t>()) + "/" +
                               std::to_string(after.at("minority").get<std::size_t>());
    for (const auto& [name, m] : cell.at("models").items()) {
      const auto& met = m.at("metrics");
      const auto& ref = m.at("reference");
      out << std::left << std::setw(10) << cell.at("name").get<std::string>() << std::setw(6) << name
          << std::right << std::setw(14) << counts << std::setw(9) << pct(met.at("accuracy")) << std::setw(9)
          << pct(met.at("precision")) << std::setw(9) << pct(met.at("recall")) << std::setw(9)
          << pct(met.at("f1")) << std::setw(9) << pct(m.at("auc")) << std::setw(11)
          << (ref.contains("accuracy") ? pct(ref.at("accuracy").at("reference")) : std::string("-"))
          << std::setw(11) << pct(ref.at("auc").at("reference")) << '\n';
    }
  }
  out << "\nreference columns: published results on the public credit-card dataset; tolerance +/-"
      << pct(report.at("reference_tolerance")) << " points\n";
  for (const auto& cell : report.at("cells")) {
    out << cell.at("name").get<std::string>() << ": removed";
    for (const auto& [reason, n] : cell.at("removed_by_reason").items()) out << ' ' << reason << '=' << n;
    if (cell.at("removed_by_reason").empty()) out << " nothing";
    if (cell.at("ratio_step_applied").get<bool>()) out << " (includes random ratio step)";
    out << '\n';
  }
  return out.str();
}

}  // namespace fraudkit
