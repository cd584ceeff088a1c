#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudkit/dataset.hpp"
#include "fraudkit/neighbors.hpp"
#include "fraudkit/net.hpp"
#include "fraudkit/resample.hpp"

namespace fraudkit {

// Where under-sampling happens relative to the train/test split.
enum class ResampleScope { before_split, train_only };

struct SamplerEntry {
  resample::SamplerConfig sampler;
  std::uint64_t ratio_seed = 0;
};

// One experiment. Unset seeds are derived from master_seed:
//   split.seed            = master_seed + 1
//   samplers[i].seed      = master_seed + 100 + i   (condensation order)
//   samplers[i].ratio_seed= master_seed + 200 + i   (ratio step)
//   dnn_seed              = master_seed + 300; cell i uses dnn_seed + 3i
//                           (init), + 3i + 1 (dropout), + 3i + 2 (shuffle)
struct ExperimentConfig {
  std::filesystem::path data_path;
  std::filesystem::path output_dir = "fraudkit-out";
  std::uint64_t master_seed = 42;
  ingest::PreprocessConfig preprocess;
  ingest::SplitSpec split;
  ResampleScope resample_scope = ResampleScope::before_split;
  std::vector<SamplerEntry> samplers;
  std::size_t knn_k = 5;
  neighbors::IndexStrategy index_strategy = neighbors::IndexStrategy::automatic;
  net::TrainConfig train;
  std::uint64_t dnn_seed = 0;
};

struct ConfigValidation {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // "field.path: message"
  bool ok() const noexcept { return errors.empty(); }
};

// Resolves defaults and checks every field. Unknown keys are errors, with
// the closest known key suggested.
ConfigValidation parse_config(const nlohmann::json& doc);
ConfigValidation validate_config(const std::filesystem::path& path);

// Fully resolved form; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

std::string to_string(ResampleScope s);
std::string to_string(neighbors::IndexStrategy s);
std::string to_string(net::Optimizer o);
std::string to_string(ingest::Scaling s);
std::string to_string(ingest::FitScope s);

}  // namespace fraudkit
