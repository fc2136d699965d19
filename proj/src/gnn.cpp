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

#include "phyguard/gnn.hpp"

#include <cmath>

#include "phyguard/error.hpp"

namespace phyguard {

using nn::Matrix;

GnnModel::GnnModel(std::vector<MessageLayer> layers, nn::DenseLayer readout)
    : layers_(std::move(layers)), readout_(std::move(readout)) {
  require(!layers_.empty(), "GNN needs at least one message-passing layer");
  std::size_t d = 1;
  for (const auto& layer : layers_) {
    const std::size_t width = layer.g2.outputs();
    require(layer.g2.inputs() == 2 * d, "G2 input width must be twice the node feature width");
    require(layer.g1.inputs() == d + width, "G1 input width must be node width + message width");
    d = layer.g1.outputs();
  }
  require(readout_.inputs() == d && readout_.outputs() == 1, "readout must map the final width to one value");
}

GnnModel GnnModel::make(Rng& rng, std::size_t width, std::size_t num_layers) {
  std::vector<MessageLayer> layers;
  std::size_t d = 1;
  for (std::size_t l = 0; l < num_layers; ++l) {
    MessageLayer layer;
    layer.g2 = nn::DenseLayer::make(2 * d, width, nn::Activation::relu(), rng);
    layer.g1 = nn::DenseLayer::make(d + width, width, nn::Activation::relu(), rng);
    layers.push_back(std::move(layer));
    d = width;
  }
  return GnnModel(std::move(layers), nn::DenseLayer::make(d, 1, nn::Activation::identity(), rng));
}

GnnModel GnnModel::zeros_like() const {
  GnnModel out = *this;
  out.set_zero();
  return out;
}

void GnnModel::set_zero() {
  for (auto& layer : layers_) {
    for (auto* dense : {&layer.g1, &layer.g2}) {
      dense->weight.setZero();
      dense->bias.setZero();
    }
  }
  readout_.weight.setZero();
  readout_.bias.setZero();
}

std::vector<std::span<double>> GnnModel::parameters() {
  std::vector<std::span<double>> out;
  auto add = [&out](nn::DenseLayer& l) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  };
  for (auto& layer : layers_) {
    add(layer.g1);
    add(layer.g2);
  }
  add(readout_);
  return out;
}

double gnn_forward(const GnnModel& model, const DetectionGraph& g, GnnCache* cache) {
  const auto k = static_cast<Eigen::Index>(g.num_nodes());
  require(k >= 1, "graph has no nodes");
  GnnCache local;
  GnnCache& c = cache != nullptr ? *cache : local;
  c.messages.clear();
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    for (auto u : g.neighbors(v)) c.messages.emplace_back(v, u);
  }
  const auto num_messages = static_cast<Eigen::Index>(c.messages.size());
  const auto num_layers = model.layers().size();
  c.features.assign(num_layers + 1, Matrix());
  c.message_pre.assign(num_layers, Matrix());
  c.update_input.assign(num_layers, Matrix());
  c.update_pre.assign(num_layers, Matrix());

  c.features[0].resize(1, k);
  for (Eigen::Index v = 0; v < k; ++v) c.features[0](0, v) = g.node_index_feature()[static_cast<std::size_t>(v)];

  for (std::size_t l = 0; l < num_layers; ++l) {
    const auto& layer = model.layers()[l];
    const Matrix& phi = c.features[l];
    const Eigen::Index d = phi.rows();
    const Eigen::Index width = static_cast<Eigen::Index>(layer.g2.outputs());
    require(static_cast<std::size_t>(2 * d) == layer.g2.inputs(), "node feature width does not match G2");

    // G2 on [phi_v; phi_u] splits into a receiver and a sender term.
    const Matrix recv = layer.g2.weight.leftCols(d) * phi;
    const Matrix send = layer.g2.weight.rightCols(d) * phi;
    Matrix& pre = c.message_pre[l];
    pre.resize(width, num_messages);
    Matrix aggregate = Matrix::Zero(width, k);
    for (Eigen::Index e = 0; e < num_messages; ++e) {
      const auto [v, u] = c.messages[static_cast<std::size_t>(e)];
      pre.col(e) = recv.col(static_cast<Eigen::Index>(v)) + send.col(static_cast<Eigen::Index>(u)) + layer.g2.bias;
      aggregate.col(static_cast<Eigen::Index>(v)) += pre.col(e).cwiseMax(0.0);
    }
    Matrix& input = c.update_input[l];
    input.resize(d + width, k);
    input.topRows(d) = phi;
    input.bottomRows(width) = aggregate;
    c.features[l + 1] = layer.g1.forward(input, &c.update_pre[l]);
  }
  c.pooled = c.features.back().rowwise().mean();
  const Matrix out = model.readout().forward(c.pooled);
  return out(0, 0);
}

void gnn_backward(const GnnModel& model, const GnnCache& cache, double upstream, GnnModel& grad) {
  const auto num_layers = model.layers().size();
  require(cache.features.size() == num_layers + 1, "backward called without a matching forward cache");
  require(grad.layers().size() == num_layers, "gradient model shape mismatch");
  const Eigen::Index k = cache.features[0].cols();

  Matrix up(1, 1);
  up(0, 0) = upstream;
  const Matrix dpooled = model.readout().backward(cache.pooled, cache.pooled, up, grad.readout(), true);
  Matrix dphi = dpooled.replicate(1, k) / static_cast<double>(k);

  for (std::size_t l = num_layers; l-- > 0;) {
    const auto& layer = model.layers()[l];
    auto& glayer = grad.layers()[l];
    const Matrix& phi = cache.features[l];
    const Eigen::Index d = phi.rows();
    const Eigen::Index width = static_cast<Eigen::Index>(layer.g2.outputs());

    const Matrix dinput = layer.g1.backward(cache.update_input[l], cache.update_pre[l], dphi, glayer.g1, true);
    Matrix dphi_prev = dinput.topRows(d);
    const Matrix dagg = dinput.bottomRows(width);

    Matrix drecv = Matrix::Zero(width, k);
    Matrix dsend = Matrix::Zero(width, k);
    const Matrix& pre = cache.message_pre[l];
    for (Eigen::Index e = 0; e < pre.cols(); ++e) {
      const auto [v, u] = cache.messages[static_cast<std::size_t>(e)];
      const auto vi = static_cast<Eigen::Index>(v);
      const Eigen::VectorXd dz = (pre.col(e).array() > 0.0).select(dagg.col(vi), 0.0);
      drecv.col(vi) += dz;
      dsend.col(static_cast<Eigen::Index>(u)) += dz;
      glayer.g2.bias += dz;
    }
    glayer.g2.weight.leftCols(d).noalias() += drecv * phi.transpose();
    glayer.g2.weight.rightCols(d).noalias() += dsend * phi.transpose();
    dphi_prev.noalias() += layer.g2.weight.leftCols(d).transpose() * drecv;
    dphi_prev.noalias() += layer.g2.weight.rightCols(d).transpose() * dsend;
    dphi = std::move(dphi_prev);
  }
}

namespace {

class GraphClassification {
 public:
  GraphClassification(std::span<const LabeledGraph> train, std::span<const LabeledGraph> val)
      : train_(train), val_(val) {}

  std::size_t train_size() const { return train_.size(); }

  double batch_gradient(const GnnModel& model, std::span<const std::size_t> batch, GnnModel& grad) {
    double loss = 0.0;
    const double n = static_cast<double>(batch.size());
    for (auto i : batch) {
      const auto& item = train_[i];
      const double logit = gnn_forward(model, item.graph, &cache_);
      loss += nn::bce_with_logit(logit, item.label);
      gnn_backward(model, cache_, nn::bce_gradient(logit, item.label) / n, grad);
    }
    return loss / n;
  }

  nn::Evaluation validate(const GnnModel& model) const {
    nn::Evaluation e;
    for (const auto& item : val_) {
      const double logit = gnn_forward(model, item.graph);
      e.loss += nn::bce_with_logit(logit, item.label);
      e.accuracy += ((logit > 0.0) == (item.label == 1)) ? 1.0 : 0.0;
    }
    e.loss /= static_cast<double>(val_.size());
    e.accuracy /= static_cast<double>(val_.size());
    return e;
  }

 private:
  std::span<const LabeledGraph> train_;
  std::span<const LabeledGraph> val_;
  GnnCache cache_;
};

}  // namespace

nn::FitHistory train_gnn(GnnModel& model, std::span<const LabeledGraph> train_graphs,
                         std::span<const LabeledGraph> val_graphs, const nn::TrainConfig& config) {
  bool has[2] = {false, false};
  for (const auto& item : train_graphs) {
    require(item.label == 0 || item.label == 1, "graph labels must be 0 or 1");
    has[item.label] = true;
  }
  if (!has[0] || !has[1]) throw ConfigError("GNN training set must contain both H0 and H1 graphs");
  if (val_graphs.empty()) throw ConfigError("GNN validation set is empty");
  GraphClassification problem(train_graphs, val_graphs);
  return nn::fit(model, problem, config);
}

Hypothesis decide(const GnnModel& model, const DetectionGraph& g, double threshold) {
  return gnn_forward(model, g) > threshold ? Hypothesis::h1 : Hypothesis::h0;
}

nlohmann::json to_json(const GnnModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers()) layers.push_back({{"g1", nn::to_json(layer.g1)}, {"g2", nn::to_json(layer.g2)}});
  return {{"format_version", nn::kModelFormatVersion},
          {"kind", "gnn"},
          {"aggregation", "sum"},
          {"readout_pooling", "mean"},
          {"layers", layers},
          {"readout", nn::to_json(model.readout())}};
}

GnnModel gnn_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != nn::kModelFormatVersion || j.at("kind").get<std::string>() != "gnn") {
    throw ConfigError("not a version-" + std::to_string(nn::kModelFormatVersion) + " GNN model");
  }
  std::vector<MessageLayer> layers;
  for (const auto& lj : j.at("layers")) layers.push_back({nn::layer_from_json(lj.at("g1")), nn::layer_from_json(lj.at("g2"))});
  return GnnModel(std::move(layers), nn::layer_from_json(j.at("readout")));
}

void save_gnn(const std::filesystem::path& path, const GnnModel& model) { nn::save_json(path, to_json(model)); }

GnnModel load_gnn(const std::filesystem::path& path) { return gnn_from_json(nn::load_json(path)); }

}  // namespace phyguard
