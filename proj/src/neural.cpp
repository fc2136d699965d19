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

#include "phyguard/neural.hpp"

#include <fstream>
#include <ostream>

namespace phyguard::nn {
namespace {

const char* activation_tag(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::identity: break;
  }
  return "identity";
}

Activation activation_from_tag(const std::string& tag, double slope) {
  if (tag == "relu") return Activation::relu();
  if (tag == "leaky_relu") return Activation::leaky_relu(slope);
  if (tag == "identity") return Activation::identity();
  throw ConfigError("unknown activation '" + tag + "'");
}

void activate(Matrix& z, const Activation& act) {
  switch (act.kind) {
    case ActivationKind::relu: z = z.cwiseMax(0.0); break;
    case ActivationKind::leaky_relu: z = z.cwiseMax(0.0) + act.slope * z.cwiseMin(0.0); break;
    case ActivationKind::identity: break;
  }
}

}  // namespace

DenseLayer DenseLayer::make(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  require(in > 0 && out > 0, "layer dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  DenseLayer layer = zeros(in, out, activation);
  for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = u(rng);
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
  return layer;
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out, Activation activation) {
  return {Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Vector::Zero(static_cast<Eigen::Index>(out)), activation};
}

Matrix DenseLayer::forward(const Matrix& x, Matrix* pre) const {
  if (static_cast<std::size_t>(x.rows()) != inputs()) {
    throw PreconditionError("layer expects " + std::to_string(inputs()) + " inputs, got " +
                            std::to_string(x.rows()));
  }
  Matrix z = weight * x;
  z.colwise() += bias;
  if (pre != nullptr) *pre = z;
  activate(z, activation);
  return z;
}

Matrix DenseLayer::backward(const Matrix& x, const Matrix& pre, const Matrix& upstream, DenseLayer& grad,
                            bool want_input_grad) const {
  Matrix dz;
  switch (activation.kind) {
    case ActivationKind::identity: dz = upstream; break;
    case ActivationKind::relu:
      dz = (pre.array() > 0.0).select(upstream, 0.0);
      break;
    case ActivationKind::leaky_relu:
      dz = (pre.array() > 0.0).select(upstream, activation.slope * upstream);
      break;
  }
  grad.weight.noalias() += dz * x.transpose();
  grad.bias.noalias() += dz.rowwise().sum();
  if (!want_input_grad) return {};
  return weight.transpose() * dz;
}

nlohmann::json to_json(const DenseLayer& layer) {
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(layer.weight.size()));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) weights.push_back(layer.weight(r, c));
  }
  nlohmann::json j = {{"in", layer.inputs()},
                      {"out", layer.outputs()},
                      {"activation", activation_tag(layer.activation.kind)},
                      {"weights", weights},
                      {"biases", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}};
  if (layer.activation.kind == ActivationKind::leaky_relu) j["slope"] = layer.activation.slope;
  return j;
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  const auto in = j.at("in").get<std::size_t>();
  const auto out = j.at("out").get<std::size_t>();
  const auto act = activation_from_tag(j.at("activation").get<std::string>(), j.value("slope", 0.0));
  const auto weights = j.at("weights").get<std::vector<double>>();
  const auto biases = j.at("biases").get<std::vector<double>>();
  if (weights.size() != in * out || biases.size() != out) throw ConfigError("layer parameter count mismatch");
  DenseLayer layer = DenseLayer::zeros(in, out, act);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = weights[k++];
  }
  for (std::size_t i = 0; i < out; ++i) layer.bias(static_cast<Eigen::Index>(i)) = biases[i];
  return layer;
}

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    require(layers_[i].bias.size() == layers_[i].weight.rows(), "bias length must match layer outputs");
    if (i > 0) {
      require(layers_[i].inputs() == layers_[i - 1].outputs(),
              "layer " + std::to_string(i) + " input width does not match previous output width");
    }
  }
  require(all_finite(), "network parameters must be finite");
}

DenseNetwork DenseNetwork::make(std::span<const std::size_t> widths, std::span<const Activation> activations,
                                Rng& rng) {
  require(widths.size() >= 2 && activations.size() == widths.size() - 1,
          "need one activation per layer and at least one layer");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back(DenseLayer::make(widths[i], widths[i + 1], activations[i], rng));
  }
  return DenseNetwork(std::move(layers));
}

std::size_t DenseNetwork::input_size() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
std::size_t DenseNetwork::output_size() const { return layers_.empty() ? 0 : layers_.back().outputs(); }

std::vector<double> DenseNetwork::forward(std::span<const double> input) const {
  Matrix x(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = input[i];
  const Matrix y = forward(x);
  return {y.data(), y.data() + y.size()};
}

Matrix DenseNetwork::forward(const Matrix& inputs) const {
  require(static_cast<std::size_t>(inputs.rows()) == input_size(),
          "network expects " + std::to_string(input_size()) + " inputs, got " + std::to_string(inputs.rows()));
  const Eigen::Index n = inputs.cols();
  const Eigen::Index padded = (n + kColumnAlignment - 1) / kColumnAlignment * kColumnAlignment;
  Matrix x = Matrix::Zero(inputs.rows(), std::max(padded, kColumnAlignment));
  x.leftCols(n) = inputs;
  for (const auto& layer : layers_) x = layer.forward(x);
  return x.leftCols(n);
}

Matrix DenseNetwork::forward(const Matrix& inputs, ForwardCache& cache) const {
  require(static_cast<std::size_t>(inputs.rows()) == input_size(),
          "network expects " + std::to_string(input_size()) + " inputs, got " + std::to_string(inputs.rows()));
  cache.inputs.resize(layers_.size());
  cache.pre_activations.resize(layers_.size());
  Matrix x = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs[i] = x;
    x = layers_[i].forward(cache.inputs[i], &cache.pre_activations[i]);
  }
  return x;
}

Matrix DenseNetwork::backward(const ForwardCache& cache, const Matrix& upstream, DenseNetwork& grad,
                              bool want_input_grad) const {
  require(cache.inputs.size() == layers_.size(), "backward called without a matching forward cache");
  require(grad.layers_.size() == layers_.size(), "gradient network shape mismatch");
  require(static_cast<std::size_t>(upstream.rows()) == output_size() &&
              upstream.cols() == cache.inputs.front().cols(),
          "upstream gradient shape mismatch");
  Matrix g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = i > 0 || want_input_grad;
    g = layers_[i].backward(cache.inputs[i], cache.pre_activations[i], g, grad.layers_[i], need);
  }
  return want_input_grad ? g : Matrix();
}

DenseNetwork DenseNetwork::zeros_like() const {
  DenseNetwork out = *this;
  out.set_zero();
  return out;
}

void DenseNetwork::set_zero() {
  for (auto& layer : layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

bool DenseNetwork::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

std::vector<std::span<double>> DenseNetwork::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return out;
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

bool operator==(const DenseNetwork& a, const DenseNetwork& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (!(x.activation == y.activation) || x.weight.rows() != y.weight.rows() ||
        x.weight.cols() != y.weight.cols() || x.weight != y.weight || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

nlohmann::json to_json(const DenseNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) layers.push_back(to_json(layer));
  return {{"format_version", kModelFormatVersion}, {"kind", "dense"}, {"layers", layers}};
}

DenseNetwork network_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != kModelFormatVersion) {
    throw ConfigError("unsupported model format_version " + j.at("format_version").dump());
  }
  std::vector<DenseLayer> layers;
  for (const auto& lj : j.at("layers")) layers.push_back(layer_from_json(lj));
  return DenseNetwork(std::move(layers));
}

void save_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPrerequisiteError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

double bce_with_logit(double logit, int label) {
  return std::max(logit, 0.0) - label * logit + std::log1p(std::exp(-std::abs(logit)));
}

double bce_gradient(double logit, int label) {
  const double sigmoid = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  return sigmoid - label;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
  if (max_epochs > 0 && early_stop_patience > max_epochs) {
    throw ConfigError("early_stop_patience must not exceed max_epochs");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"early_stop_patience", c.early_stop_patience},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
}

void Adam::step(const std::vector<std::span<double>>& params, const std::vector<std::span<double>>& grads) {
  require(params.size() == grads.size(), "parameter/gradient block count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  require(m_.size() == params.size(), "parameter layout changed between Adam steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = m_[b];
    auto& v = v_[b];
    require(p.size() == g.size() && p.size() == m.size(), "parameter block size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void write_history_csv(std::ostream& out, const FitHistory& history) {
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  out.precision(17);
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_accuracy << '\n';
  }
}

namespace {

class DenseClassification {
 public:
  DenseClassification(const LabeledSet& train, const LabeledSet& val) : train_(train), val_(val) {}

  std::size_t train_size() const { return train_.size(); }

  double batch_gradient(const DenseNetwork& net, std::span<const std::size_t> batch, DenseNetwork& grad) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    Matrix x(train_.inputs.rows(), n);
    for (Eigen::Index c = 0; c < n; ++c) x.col(c) = train_.inputs.col(static_cast<Eigen::Index>(batch[c]));
    const Matrix logits = net.forward(x, cache_);
    Matrix upstream(1, n);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const int label = train_.labels[batch[c]];
      loss += bce_with_logit(logits(0, c), label);
      upstream(0, c) = bce_gradient(logits(0, c), label) / static_cast<double>(n);
    }
    net.backward(cache_, upstream, grad);
    return loss / static_cast<double>(n);
  }

  Evaluation validate(const DenseNetwork& net) const {
    const Matrix logits = net.forward(val_.inputs);
    Evaluation e;
    for (std::size_t i = 0; i < val_.size(); ++i) {
      const double z = logits(0, static_cast<Eigen::Index>(i));
      e.loss += bce_with_logit(z, val_.labels[i]);
      e.accuracy += ((z > 0.0) == (val_.labels[i] == 1)) ? 1.0 : 0.0;
    }
    e.loss /= static_cast<double>(val_.size());
    e.accuracy /= static_cast<double>(val_.size());
    return e;
  }

 private:
  const LabeledSet& train_;
  const LabeledSet& val_;
  ForwardCache cache_;
};

}  // namespace

FitHistory train(DenseNetwork& net, const LabeledSet& train_set, const LabeledSet& val_set,
                 const TrainConfig& config) {
  require(net.output_size() == 1, "binary classifier needs exactly one output");
  require(train_set.size() > 0 && val_set.size() > 0, "train and validation sets must be nonempty");
  require(static_cast<std::size_t>(train_set.inputs.cols()) == train_set.size() &&
              static_cast<std::size_t>(val_set.inputs.cols()) == val_set.size(),
          "labels and inputs disagree in size");
  DenseClassification problem(train_set, val_set);
  return fit(net, problem, config);
}

}  // namespace phyguard::nn
