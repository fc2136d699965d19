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

#include <filesystem>
#include <span>
#include <vector>

#include "phyguard/graph.hpp"
#include "phyguard/neural.hpp"
#include "phyguard/trajectory.hpp"

namespace phyguard {

/// One message-passing step:
///   phi_v' = G1([phi_v, sum_{u in N(v)} G2([phi_v, phi_u])])
/// with G1, G2 single fully connected ReLU layers.
struct MessageLayer {
  nn::DenseLayer g1;  // (d + width) -> width
  nn::DenseLayer g2;  // 2d -> width
};

/// Message-passing classifier. The statistic is an affine map of the mean
/// final node feature; initial node features are the normalized frame
/// indices.
class GnnModel {
 public:
  static constexpr std::size_t kDefaultWidth = 64;
  static constexpr std::size_t kDefaultLayers = 3;

  GnnModel() = default;
  GnnModel(std::vector<MessageLayer> layers, nn::DenseLayer readout);

  static GnnModel make(Rng& rng, std::size_t width = kDefaultWidth, std::size_t num_layers = kDefaultLayers);

  const std::vector<MessageLayer>& layers() const { return layers_; }
  std::vector<MessageLayer>& layers() { return layers_; }
  const nn::DenseLayer& readout() const { return readout_; }
  nn::DenseLayer& readout() { return readout_; }

  GnnModel zeros_like() const;
  void set_zero();
  std::vector<std::span<double>> parameters();

 private:
  std::vector<MessageLayer> layers_;
  nn::DenseLayer readout_;  // width -> 1, identity
};

/// Intermediate values kept for the backward pass.
struct GnnCache {
  std::vector<std::pair<std::size_t, std::size_t>> messages;  // (receiver, sender)
  std::vector<nn::Matrix> features;                            // phi^(0..L), d x K
  std::vector<nn::Matrix> message_pre;                         // per layer, width x |messages|
  std::vector<nn::Matrix> update_input;                        // [phi; aggregate] per layer
  std::vector<nn::Matrix> update_pre;                          // per layer, width x K
  nn::Matrix pooled;                                           // width x 1
};

double gnn_forward(const GnnModel& model, const DetectionGraph& g, GnnCache* cache = nullptr);

/// Accumulates upstream * d statistic / d parameters into `grad`.
void gnn_backward(const GnnModel& model, const GnnCache& cache, double upstream, GnnModel& grad);

struct LabeledGraph {
  DetectionGraph graph;
  int label = 0;  // 1 = attack (H1)
};

/// BCE on the statistic as a logit; returns the best-validation model.
nn::FitHistory train_gnn(GnnModel& model, std::span<const LabeledGraph> train_graphs,
                         std::span<const LabeledGraph> val_graphs, const nn::TrainConfig& config);

/// H1 iff statistic > threshold.
Hypothesis decide(const GnnModel& model, const DetectionGraph& g, double threshold);

nlohmann::json to_json(const GnnModel& model);
GnnModel gnn_from_json(const nlohmann::json& j);
void save_gnn(const std::filesystem::path& path, const GnnModel& model);
GnnModel load_gnn(const std::filesystem::path& path);

}  // namespace phyguard
