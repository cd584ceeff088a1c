#include "fraudkit/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fraudkit/error.hpp"

namespace fraudkit::net {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

std::vector<LayerSpec> default_architecture(std::size_t input_dim) {
  if (input_dim < 1) throw Error("default_architecture: input_dim must be at least 1");
  return {
      LayerSpec::dense(16),   LayerSpec::dense(24),   LayerSpec::dropout(0.5),
      LayerSpec::dense(20),   LayerSpec::dense(15),   LayerSpec::dropout(0.3),
      LayerSpec::dense(24),   LayerSpec::dense(1, Activation::sigmoid),
  };
}

std::vector<std::size_t> layer_parameter_counts(std::size_t input_dim,
                                                const std::vector<LayerSpec>& layers) {
  std::vector<std::size_t> counts;
  std::size_t width = input_dim;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::dense) {
      counts.push_back(width * l.units + l.units);
      width = l.units;
    }
  }
  return counts;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::linear: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
  }
}

// d(activation)/dz expressed through the activation output.
Matrix activation_grad(const Matrix& out, Activation a) {
  switch (a) {
    case Activation::linear: return Matrix::Ones(out.rows(), out.cols());
    case Activation::relu: return (out.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
  }
  return {};
}

void validate_layers(std::size_t input_dim, const std::vector<LayerSpec>& layers) {
  if (input_dim < 1) throw Error("network: input_dim must be at least 1");
  if (layers.empty()) throw Error("network: no layers");
  for (const auto& l : layers) {
    if (l.kind == LayerKind::dense && l.units < 1) throw Error("network: dense layer with 0 units");
    if (l.kind == LayerKind::dropout && !(l.rate >= 0.0 && l.rate < 1.0)) {
      throw Error("network: dropout rate must lie in [0, 1)");
    }
  }
  const auto& last = layers.back();
  if (last.kind != LayerKind::dense || last.units != 1 || last.activation != Activation::sigmoid) {
    throw Error("network: last layer must be a single sigmoid unit");
  }
}

}  // namespace

NetworkModel::NetworkModel(std::size_t input_dim, std::vector<LayerSpec> layers,
                           std::uint64_t init_seed, std::uint64_t dropout_seed)
    : input_dim_(input_dim),
      layers_(std::move(layers)),
      init_seed_(init_seed),
      dropout_seed_(dropout_seed),
      rng_(dropout_seed) {
  validate_layers(input_dim_, layers_);
  Rng init(init_seed_);
  std::size_t width = input_dim_;
  for (const auto& l : layers_) {
    if (l.kind != LayerKind::dense) continue;
    DenseParams p{Matrix(width, l.units), Vector::Zero(static_cast<Eigen::Index>(l.units))};
    const double limit = std::sqrt(6.0 / static_cast<double>(width + l.units));
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights.cols(); ++j) {
        p.weights(i, j) = (2.0 * init.uniform() - 1.0) * limit;
      }
    }
    params_.push_back(std::move(p));
    width = l.units;
  }
}

std::size_t NetworkModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.weights.size() + p.bias.size());
  return n;
}

void NetworkModel::zero_weights() {
  for (auto& p : params_) {
    p.weights.setZero();
    p.bias.setZero();
  }
}

NetworkModel NetworkModel::without_dropout() const {
  NetworkModel copy = *this;
  for (auto& l : copy.layers_) {
    if (l.kind == LayerKind::dropout) l.rate = 0.0;
  }
  return copy;
}

ForwardResult NetworkModel::forward(const Matrix& batch, Mode mode) {
  if (static_cast<std::size_t>(batch.cols()) != input_dim_) {
    throw Error("forward: batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                std::to_string(input_dim_));
  }
  ForwardResult r;
  auto& c = r.cache;
  Matrix a = batch;
  std::size_t dense_index = 0;
  for (const auto& l : layers_) {
    c.inputs.push_back(a);
    if (l.kind == LayerKind::dense) {
      const auto& p = params_[dense_index++];
      Matrix z = a * p.weights;
      z.rowwise() += p.bias.transpose();
      activate(z, l.activation);
      a = std::move(z);
      c.masks.emplace_back();
    } else if (mode == Mode::train && l.rate > 0.0) {
      const double keep_scale = 1.0 / (1.0 - l.rate);
      Matrix mask(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
          mask(i, j) = rng_.uniform() < l.rate ? 0.0 : keep_scale;
        }
      }
      a = a.cwiseProduct(mask);
      c.masks.push_back(std::move(mask));
    } else {
      c.masks.emplace_back();
    }
    if (!a.allFinite()) throw Error("forward: non-finite activation");
    c.outputs.push_back(a);
  }
  r.probabilities = a.col(0);
  return r;
}

Gradients NetworkModel::backward(const ForwardResult& fwd, const std::vector<Label>& labels) const {
  const auto n = fwd.probabilities.size();
  if (static_cast<std::size_t>(n) != labels.size()) throw Error("backward: label count mismatch");
  const auto& c = fwd.cache;

  // Sigmoid output with cross-entropy: dL/dz = (p - y) / n.
  Matrix delta(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(i, 0) = (fwd.probabilities(i) - labels[static_cast<std::size_t>(i)]) / static_cast<double>(n);
  }

  Gradients g;
  g.dense.resize(params_.size());
  std::size_t dense_index = params_.size();
  bool output_layer = true;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    if (l.kind == LayerKind::dense) {
      --dense_index;
      if (!output_layer) delta = delta.cwiseProduct(activation_grad(c.outputs[li], l.activation));
      output_layer = false;
      const auto& p = params_[dense_index];
      g.dense[dense_index].weights = c.inputs[li].transpose() * delta;
      g.dense[dense_index].bias = delta.colwise().sum().transpose();
      delta = delta * p.weights.transpose();
    } else if (c.masks[li].size() > 0) {
      delta = delta.cwiseProduct(c.masks[li]);
    }
  }
  return g;
}

double bce_loss(const Vector& p, const std::vector<Label>& y) {
  if (static_cast<std::size_t>(p.size()) != y.size()) throw Error("bce_loss: length mismatch");
  if (y.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p(static_cast<Eigen::Index>(i)), kProbabilityClamp, 1.0 - kProbabilityClamp);
    sum -= y[i] == kFraud ? std::log(q) : std::log(1.0 - q);
  }
  return sum / static_cast<double>(y.size());
}

namespace {

Matrix gather_rows(const FeatureMatrix& f, const std::vector<std::size_t>& rows, std::size_t begin,
                   std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin), f.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = f.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

struct AdamState {
  std::vector<DenseParams> m;
  std::vector<DenseParams> v;
  std::uint64_t step = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-7;

}  // namespace

std::vector<EpochStats> train(NetworkModel& m, const LabeledDataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw Error("train: empty training set");
  if (data.dims() != m.input_dim()) {
    throw Error("train: data has " + std::to_string(data.dims()) + " features, model expects " +
                std::to_string(m.input_dim()));
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw Error("train: epochs and batch_size must be >= 1");
  if (!(cfg.classify_threshold > 0.0 && cfg.classify_threshold < 1.0)) {
    throw Error("train: classify_threshold must lie in (0, 1)");
  }

  AdamState adam;
  for (const auto& p : m.params()) {
    adam.m.push_back({Matrix::Zero(p.weights.rows(), p.weights.cols()), Vector::Zero(p.bias.size())});
    adam.v.push_back(adam.m.back());
  }

  Rng shuffler(cfg.shuffle_seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochStats> history;
  history.reserve(cfg.epochs);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const Matrix x = gather_rows(data.features(), order, begin, end);
      std::vector<Label> y;
      for (std::size_t i = begin; i < end; ++i) y.push_back(data.labels()[order[i]]);

      ForwardResult fwd;
      try {
        fwd = m.forward(x, Mode::train);
      } catch (const Error& e) {
        throw DivergenceError(std::string("train: ") + e.what(), epoch);
      }
      const double loss = bce_loss(fwd.probabilities, y);
      if (!std::isfinite(loss)) throw DivergenceError("train: non-finite loss", epoch);
      loss_sum += loss * static_cast<double>(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        const Label pred = fwd.probabilities(static_cast<Eigen::Index>(i)) >= cfg.classify_threshold;
        correct += pred == y[i];
      }

      const Gradients g = m.backward(fwd, y);
      auto& params = m.params();
      if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t l = 0; l < params.size(); ++l) {
          params[l].weights -= cfg.learning_rate * g.dense[l].weights;
          params[l].bias -= cfg.learning_rate * g.dense[l].bias;
        }
      } else {
        ++adam.step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
        auto update = [&](auto& w, auto& mom, auto& var, const auto& grad) {
          mom = kBeta1 * mom + (1.0 - kBeta1) * grad;
          var = kBeta2 * var + (1.0 - kBeta2) * grad.cwiseProduct(grad);
          w.array() -= cfg.learning_rate * (mom.array() / c1) /
                       ((var.array() / c2).sqrt() + kAdamEpsilon);
        };
        for (std::size_t l = 0; l < params.size(); ++l) {
          update(params[l].weights, adam.m[l].weights, adam.v[l].weights, g.dense[l].weights);
          update(params[l].bias, adam.m[l].bias, adam.v[l].bias, g.dense[l].bias);
        }
      }
    }
    const double n = static_cast<double>(data.rows());
    history.push_back({loss_sum / n, static_cast<double>(correct) / n});
  }
  for (const auto& p : m.params()) {
    if (!p.weights.allFinite() || !p.bias.allFinite()) {
      throw DivergenceError("train: non-finite weights", cfg.epochs);
    }
  }
  return history;
}

Predictions predict(NetworkModel& m, const FeatureMatrix& features, double threshold) {
  if (static_cast<std::size_t>(features.cols()) != m.input_dim()) {
    throw Error("predict: features have " + std::to_string(features.cols()) +
                " columns, model expects " + std::to_string(m.input_dim()));
  }
  constexpr Eigen::Index kChunk = 4096;
  Predictions out;
  out.scores.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index begin = 0; begin < features.rows(); begin += kChunk) {
    const auto rows = std::min(kChunk, features.rows() - begin);
    const Matrix x = features.middleRows(begin, rows);
    const auto fwd = m.forward(x, Mode::infer);
    for (Eigen::Index i = 0; i < rows; ++i) out.scores.push_back(fwd.probabilities(i));
  }
  for (double s : out.scores) out.labels.push_back(s >= threshold ? kFraud : kGenuine);
  return out;
}

double gradient_check(const NetworkModel& m, const Matrix& batch, const std::vector<Label>& labels,
                      double epsilon) {
  for (const auto& l : m.layers()) {
    if (l.kind == LayerKind::dropout && l.rate != 0.0) {
      throw Error("gradient_check: dropout must be disabled (use without_dropout())");
    }
  }
  NetworkModel work = m;
  const Gradients analytic = work.backward(work.forward(batch, Mode::infer), labels);
  auto loss_at = [&]() { return bce_loss(work.forward(batch, Mode::infer).probabilities, labels); };

  double worst = 0.0;
  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + epsilon;
    const double up = loss_at();
    param = saved - epsilon;
    const double down = loss_at();
    param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max({std::abs(grad), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(grad - numeric) / scale);
  };
  for (std::size_t l = 0; l < work.params().size(); ++l) {
    auto& p = work.params()[l];
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights.cols(); ++j) {
        check(p.weights(i, j), analytic.dense[l].weights(i, j));
      }
    }
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) check(p.bias(i), analytic.dense[l].bias(i));
  }
  return worst;
}

}  // namespace fraudkit::net
