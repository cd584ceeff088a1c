#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fraudkit/dataset.hpp"
#include "fraudkit/rng.hpp"

namespace fraudkit::net {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LayerKind : std::uint8_t { dense = 0, dropout = 1 };
enum class Activation : std::uint8_t { linear = 0, relu = 1, sigmoid = 2 };

std::string to_string(Activation a);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;                        // dense only
  Activation activation = Activation::linear;   // dense only
  double rate = 0.0;                            // dropout only, in [0, 1)

  static LayerSpec dense(std::size_t units, Activation activation = Activation::relu) {
    return {LayerKind::dense, units, activation, 0.0};
  }
  static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, Activation::linear, rate}; }
  bool operator==(const LayerSpec&) const = default;
};

// Dense 16-24, dropout 0.5, dense 20-15, dropout 0.3, dense 24, then a
// single sigmoid unit. Hidden layers use ReLU.
std::vector<LayerSpec> default_architecture(std::size_t input_dim);

// fan_in * units + units per dense layer.
std::vector<std::size_t> layer_parameter_counts(std::size_t input_dim,
                                                const std::vector<LayerSpec>& layers);

struct DenseParams {
  Matrix weights;  // fan_in x units
  Vector bias;     // units
};

enum class Mode { train, infer };

// Per-layer values kept by forward() for backward().
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer, batch x width
  std::vector<Matrix> outputs;
  std::vector<Matrix> masks;   // dropout scale masks (train mode)
};

struct ForwardResult {
  Vector probabilities;
  ForwardCache cache;
};

struct Gradients {
  std::vector<DenseParams> dense;  // aligned with NetworkModel::params()
};

// A stack of dense and dropout layers ending in one sigmoid unit.
//
// Weights are Glorot-uniform from `init_seed`, biases zero. Dropout is
// inverted: surviving train-time activations are scaled by 1/(1-rate), so
// inference applies no dropout at all. Masks come from a generator seeded
// with `dropout_seed`; reset_rng() rewinds it.
class NetworkModel {
 public:
  NetworkModel(std::size_t input_dim, std::vector<LayerSpec> layers, std::uint64_t init_seed = 0,
               std::uint64_t dropout_seed = 0);

  std::size_t input_dim() const noexcept { return input_dim_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::vector<DenseParams>& params() noexcept { return params_; }
  const std::vector<DenseParams>& params() const noexcept { return params_; }
  std::size_t parameter_count() const;
  std::uint64_t init_seed() const noexcept { return init_seed_; }
  std::uint64_t dropout_seed() const noexcept { return dropout_seed_; }

  void reset_rng() { rng_ = Rng(dropout_seed_); }
  void zero_weights();

  // Same layers with every dropout rate set to 0.
  NetworkModel without_dropout() const;

  ForwardResult forward(const Matrix& batch, Mode mode);
  // Gradients of the mean binary cross-entropy w.r.t. every parameter.
  Gradients backward(const ForwardResult& fwd, const std::vector<Label>& labels) const;

 private:
  std::size_t input_dim_;
  std::vector<LayerSpec> layers_;
  std::vector<DenseParams> params_;
  std::uint64_t init_seed_;
  std::uint64_t dropout_seed_;
  Rng rng_;
};

inline constexpr double kProbabilityClamp = 1e-7;

// Mean of -[y ln p + (1-y) ln(1-p)] with p clamped to [1e-7, 1-1e-7].
double bce_loss(const Vector& p, const std::vector<Label>& y);

enum class Optimizer { sgd, adam };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  std::uint64_t shuffle_seed = 0;
  double classify_threshold = 0.5;
};

struct EpochStats {
  double loss;      // sample-weighted mean of train-mode batch losses
  double accuracy;  // train-mode accuracy over the epoch
  bool operator==(const EpochStats&) const = default;
};

// Mini-batch training with binary cross-entropy. The last partial batch
// is kept. Throws DivergenceError on a non-finite loss.
std::vector<EpochStats> train(NetworkModel& m, const LabeledDataset& data, const TrainConfig& cfg);

struct Predictions {
  std::vector<Label> labels;
  std::vector<double> scores;
};

// Inference-mode scores; label 1 iff score >= threshold.
Predictions predict(NetworkModel& m, const FeatureMatrix& features, double threshold = 0.5);

// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-6) over all
// parameters, using central differences of the mean BCE loss. The model
// must have no active dropout.
double gradient_check(const NetworkModel& m, const Matrix& batch, const std::vector<Label>& labels,
                      double epsilon = 1e-5);

// Binary model file; layout in docs/model_format.md.
void save_model(const NetworkModel& m, const std::filesystem::path& path);
NetworkModel load_model(const std::filesystem::path& path,
                        std::optional<std::size_t> expected_input_dim = std::nullopt);

std::vector<std::uint8_t> serialize(const NetworkModel& m);
NetworkModel deserialize(const std::vector<std::uint8_t>& bytes,
                         std::optional<std::size_t> expected_input_dim = std::nullopt);

}  // namespace fraudkit::net
