#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fraudkit/config.hpp"
#include "fraudkit/dataset.hpp"
#include "fraudkit/error.hpp"
#include "fraudkit/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_validate(const fs::path& path) {
  const auto v = fraudkit::validate_config(path);
  if (!v.ok()) {
    for (const auto& e : v.errors) std::cerr << "[config] " << e << '\n';
    return 2;
  }
  std::cout << fraudkit::to_json(*v.config).dump(2) << '\n';
  return 0;
}

int cmd_run(const fs::path& path) {
  const auto v = fraudkit::validate_config(path);
  if (!v.ok()) {
    for (const auto& e : v.errors) std::cerr << "[config] " << e << '\n';
    return 2;
  }
  try {
    fraudkit::run_pipeline(*v.config);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  std::ifstream in(v.config->output_dir / "report.json");
  std::cout << fraudkit::format_report(nlohmann::json::parse(in));
  std::cout << "outputs in " << v.config->output_dir.string() << '\n';
  return 0;
}

int cmd_report(const fs::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) {
    std::cerr << "[report] no report.json in " << dir.string() << '\n';
    return 1;
  }
  if (fs::exists(dir / "RUN_INCOMPLETE")) {
    std::cerr << "[report] warning: " << dir.string() << " holds an incomplete run\n";
  }
  try {
    std::cout << fraudkit::format_report(nlohmann::json::parse(in));
  } catch (const std::exception& e) {
    std::cerr << "[report] " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Under-sampling, k-NN and dense-network experiments for imbalanced fraud data"};
  app.require_subcommand(1);

  fs::path config_path;
  auto* run = app.add_subcommand("run", "Run the full experiment described by a config file");
  run->add_option("config", config_path, "JSON config file")->required();

  auto* validate = app.add_subcommand("validate", "Check a config file and print it fully resolved");
  validate->add_option("config", config_path, "JSON config file")->required();

  std::size_t majority = 10000, minority = 100, dims = 5;
  double separation = 3.0;
  std::uint64_t seed = 7;
  bool no_time = false;
  fs::path out_path;
  auto* synth = app.add_subcommand("synth", "Write a synthetic two-cluster dataset as CSV");
  synth->add_option("--majority", majority, "Rows labelled 0")->capture_default_str();
  synth->add_option("--minority", minority, "Rows labelled 1")->capture_default_str();
  synth->add_option("--dims", dims, "Feature dimensions")->capture_default_str();
  synth->add_option("--separation", separation, "Per-axis offset of the minority mean")->capture_default_str();
  synth->add_option("--seed", seed, "Generator seed")->capture_default_str();
  synth->add_flag("--no-time-column", no_time, "Omit the leading Time column");
  synth->add_option("-o,--out", out_path, "Output CSV path")->required();

  fs::path report_dir;
  auto* report = app.add_subcommand("report", "Pretty-print a persisted run report");
  report->add_option("dir", report_dir, "Output directory of a run")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) return cmd_run(config_path);
  if (*validate) return cmd_validate(config_path);
  if (*report) return cmd_report(report_dir);
  if (*synth) {
    try {
      auto d = fraudkit::ingest::make_synthetic(majority, minority, dims, separation, seed);
      if (!no_time) d = fraudkit::ingest::with_time_column(d);
      fraudkit::ingest::write_csv(d, out_path);
      std::cout << "wrote " << d.rows() << " rows to " << out_path.string() << '\n';
    } catch (const std::exception& e) {
      std::cerr << "[synth] " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}
