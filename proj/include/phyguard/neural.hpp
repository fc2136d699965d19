/*
 * Copyright 2026 The phyguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "phyguard/error.hpp"
#include "phyguard/random.hpp"

namespace phyguard::nn {

/// Column-major batch: one sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ActivationKind { identity, relu, leaky_relu };

struct Activation {
  ActivationKind kind = ActivationKind::identity;
  double slope = 0.0;  // leaky_relu only

  static Activation identity() { return {ActivationKind::identity, 0.0}; }
  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation leaky_relu(double slope = 0.01) { return {ActivationKind::leaky_relu, slope}; }

  double apply(double z) const {
    switch (kind) {
      case ActivationKind::relu: return z > 0.0 ? z : 0.0;
      case ActivationKind::leaky_relu: return z > 0.0 ? z : slope * z;
      case ActivationKind::identity: break;
    }
    return z;
  }
  double derivative(double z) const {
    switch (kind) {
      case ActivationKind::relu: return z > 0.0 ? 1.0 : 0.0;
      case ActivationKind::leaky_relu: return z > 0.0 ? 1.0 : slope;
      case ActivationKind::identity: break;
    }
    return 1.0;
  }
  friend bool operator==(const Activation&, const Activation&) = default;
};

/// y = act(W x + b), W is out x in.
struct DenseLayer {
  Matrix weight;
  Vector bias;
  Activation activation;

  std::size_t inputs() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t outputs() const { return static_cast<std::size_t>(weight.rows()); }

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases.
  static DenseLayer make(std::size_t in, std::size_t out, Activation activation, Rng& rng);
  static DenseLayer zeros(std::size_t in, std::size_t out, Activation activation);

  /// Batch forward; `pre` receives W x + b when non-null.
  Matrix forward(const Matrix& x, Matrix* pre = nullptr) const;
  /// Accumulates dW, db into `grad`; returns dL/dx when `want_input_grad`.
  Matrix backward(const Matrix& x, const Matrix& pre, const Matrix& upstream, DenseLayer& grad,
                  bool want_input_grad) const;
};

nlohmann::json to_json(const DenseLayer& layer);
DenseLayer layer_from_json(const nlohmann::json& j);

struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

/// Inference batches are padded to a multiple of this many columns so every
/// column goes through the same GEMM kernel; a sample's output then does not
/// depend on its position in the batch.
inline constexpr Eigen::Index kColumnAlignment = 8;

class DenseNetwork {
 public:
  DenseNetwork() = default;
  explicit DenseNetwork(std::vector<DenseLayer> layers);

  /// widths = {in, h1, ..., out}; one activation per layer.
  static DenseNetwork make(std::span<const std::size_t> widths, std::span<const Activation> activations,
                           Rng& rng);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<double> forward(std::span<const double> input) const;
  /// Position-independent batch inference (see kColumnAlignment).
  Matrix forward(const Matrix& inputs) const;
  /// Training forward; stores what backward() needs.
  Matrix forward(const Matrix& inputs, ForwardCache& cache) const;
  /// Reverse-mode pass. Accumulates parameter gradients into `grad` (which
  /// must have this network's shape) and returns dL/dinput.
  Matrix backward(const ForwardCache& cache, const Matrix& upstream, DenseNetwork& grad,
                  bool want_input_grad = false) const;

  DenseNetwork zeros_like() const;
  void set_zero();
  bool all_finite() const;
  std::vector<std::span<double>> parameters();
  std::size_t parameter_count() const;

  friend bool operator==(const DenseNetwork& a, const DenseNetwork& b);

 private:
  std::vector<DenseLayer> layers_;
};

nlohmann::json to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const nlohmann::json& j);

inline constexpr int kModelFormatVersion = 1;

void save_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json load_json(const std::filesystem::path& path);

/// softplus(logit) - label * logit, stable for large |logit|.
double bce_with_logit(double logit, int label);
/// d bce / d logit = sigmoid(logit) - label.
double bce_gradient(double logit, int label);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Adaptive moment estimation over a list of parameter blocks.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(const std::vector<std::span<double>>& params, const std::vector<std::span<double>>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FitHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: initial parameters kept
  double best_val_loss = std::numeric_limits<double>::infinity();
  double best_val_accuracy = 0.0;
};

void write_history_csv(std::ostream& out, const FitHistory& history);

/// Minibatch Adam on a problem's mean loss with best-validation
/// checkpointing and early stopping. Model needs zeros_like(), set_zero()
/// and parameters(); Problem needs
///   std::size_t train_size() const;
///   double batch_gradient(const Model&, std::span<const std::size_t>, Model& grad);
///   Evaluation validate(const Model&) const;
/// batch_gradient returns the batch mean loss and accumulates its gradient.
template <typename Model, typename Problem>
FitHistory fit(Model& model, Problem& problem, const TrainConfig& config) {
  config.validate();
  FitHistory history;
  if (config.max_epochs == 0) return history;
  const std::size_t n = problem.train_size();
  require(n > 0, "empty training set");

  Rng rng(config.seed);
  Adam adam(config.learning_rate);
  Model grad = model.zeros_like();
  Model best = model;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      grad.set_zero();
      const double loss = problem.batch_gradient(model, std::span(order).subspan(start, count), grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      adam.step(model.parameters(), grad.parameters());
      loss_sum += loss * static_cast<double>(count);
    }
    const Evaluation val = problem.validate(model);
    if (!std::isfinite(val.loss)) {
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(n), val.loss, val.accuracy});
    if (val.loss < history.best_val_loss) {
      history.best_val_loss = val.loss;
      history.best_val_accuracy = val.accuracy;
      history.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  model = best;
  return history;
}

/// Binary classification data for a single-logit network.
struct LabeledSet {
  Matrix inputs;            // in x n
  std::vector<int> labels;  // 0 or 1

  std::size_t size() const { return labels.size(); }
};

/// Trains `net` (one output = logit) with mean BCE.
FitHistory train(DenseNetwork& net, const LabeledSet& train_set, const LabeledSet& val_set,
                 const TrainConfig& config);

}  // namespace phyguard::nn
