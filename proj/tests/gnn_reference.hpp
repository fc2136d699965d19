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

#include <cstddef>
#include <vector>

#include "phyguard/gnn.hpp"

namespace phyguard::testing {

/// Message passing written out with plain loops over nodes and neighbours,
/// independent of the library's batched implementation.
inline double reference_gnn_forward(const GnnModel& model, const DetectionGraph& g) {
  const std::size_t k = g.num_nodes();
  std::vector<std::vector<double>> phi(k);
  for (std::size_t v = 0; v < k; ++v) phi[v] = {g.node_index_feature()[v]};

  auto dense_relu = [](const nn::DenseLayer& layer, const std::vector<double>& x) {
    std::vector<double> y(layer.outputs());
    for (std::size_t o = 0; o < y.size(); ++o) {
      double s = layer.bias(static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < x.size(); ++i) {
        s += layer.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
      }
      y[o] = s > 0.0 ? s : 0.0;
    }
    return y;
  };

  for (const auto& layer : model.layers()) {
    std::vector<std::vector<double>> next(k);
    for (std::size_t v = 0; v < k; ++v) {
      std::vector<double> aggregate(layer.g2.outputs(), 0.0);
      for (std::size_t u = 0; u < k; ++u) {
        if (u == v || !g.has_edge(v, u)) continue;
        std::vector<double> pair = phi[v];
        pair.insert(pair.end(), phi[u].begin(), phi[u].end());
        const auto message = dense_relu(layer.g2, pair);
        for (std::size_t i = 0; i < aggregate.size(); ++i) aggregate[i] += message[i];
      }
      std::vector<double> input = phi[v];
      input.insert(input.end(), aggregate.begin(), aggregate.end());
      next[v] = dense_relu(layer.g1, input);
    }
    phi = std::move(next);
  }

  const std::size_t width = phi.front().size();
  double out = model.readout().bias(0);
  for (std::size_t i = 0; i < width; ++i) {
    double mean = 0.0;
    for (std::size_t v = 0; v < k; ++v) mean += phi[v][i];
    mean /= static_cast<double>(k);
    out += model.readout().weight(0, static_cast<Eigen::Index>(i)) * mean;
  }
  return out;
}

}  // namespace phyguard::testing
