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

#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "gnn_reference.hpp"
#include "helpers.hpp"
#include "phyguard/error.hpp"
#include "phyguard/gnn.hpp"

using namespace phyguard;

namespace {

double fd_worst(GnnModel model, const DetectionGraph& g) {
  GnnCache cache;
  gnn_forward(model, g, &cache);
  GnnModel grad = model.zeros_like();
  gnn_backward(model, cache, 1.0, grad);
  auto params = model.parameters();
  const auto grads = grad.parameters();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double keep = params[b][i];
      params[b][i] = keep + h;
      const double up = gnn_forward(model, g);
      params[b][i] = keep - h;
      const double down = gnn_forward(model, g);
      params[b][i] = keep;
      worst = std::max(worst, testing::rel_error(grads[b][i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

// Without an attack the frames split into consecutive blocks; with one,
// frames of the two sources interleave at random.
LabeledGraph toy_graph(bool attack, Rng& rng) {
  const std::size_t k = 30;
  std::vector<int> group(k);
  if (attack) {
    std::bernoulli_distribution coin(0.5);
    for (auto& g : group) g = coin(rng) ? 1 : 0;
  } else {
    std::uniform_int_distribution<std::size_t> cut(5, k - 5);
    const std::size_t first = cut(rng);
    const bool two_cuts = std::bernoulli_distribution(0.5)(rng);
    const std::size_t second = two_cuts ? std::min(k - 1, first + 3 + cut(rng) / 3) : k;
    for (std::size_t i = 0; i < k; ++i) group[i] = i < first ? 0 : (i < second ? 1 : 2);
  }
  DetectionGraph g(k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if (group[a] == group[b]) g.add_edge(a, b);
  return {g, attack ? 1 : 0};
}

}  // namespace

TEST_SUITE("gnn") {
  TEST_CASE("forward matches an independent reference on a K=3 path") {
    Rng rng(2024);
    const auto model = GnnModel::make(rng);
    const DetectionGraph path(3, {{0, 1}, {1, 2}});
    CHECK(std::abs(gnn_forward(model, path) - testing::reference_gnn_forward(model, path)) < 1e-6);
    Rng rng2(7);
    const auto small = GnnModel::make(rng2, 5, 2);
    const DetectionGraph star(6, {{0, 5}, {1, 5}, {2, 5}, {3, 4}});
    CHECK(std::abs(gnn_forward(small, star) - testing::reference_gnn_forward(small, star)) < 1e-12);
  }

  TEST_CASE("all-zero weights output the readout bias") {
    Rng rng(1);
    GnnModel model = GnnModel::make(rng);
    model.set_zero();
    model.readout().bias(0) = 0.625;
    CHECK(gnn_forward(model, DetectionGraph(4, {{0, 1}, {2, 3}})) == 0.625);
  }

  TEST_CASE("an edgeless graph aggregates zeros everywhere") {
    Rng rng(2);
    const auto model = GnnModel::make(rng, 8, 3);
    GnnCache cache;
    gnn_forward(model, DetectionGraph(5), &cache);
    CHECK(cache.messages.empty());
    for (std::size_t l = 0; l < 3; ++l) {
      const auto& input = cache.update_input[l];
      CHECK(input.bottomRows(8).isZero(0.0));
    }
  }

  TEST_CASE("gradients match central differences on a K=4 graph") {
    Rng rng(3);
    const auto model = GnnModel::make(rng, 16, 3);
    const DetectionGraph g(4, {{0, 1}, {1, 2}, {0, 2}, {2, 3}});
    CHECK(fd_worst(model, g) < 1e-4);
  }

  TEST_CASE("zero upstream gives zero gradients; edgeless graphs leave G2 untouched") {
    Rng rng(4);
    const auto model = GnnModel::make(rng, 8, 3);
    GnnCache cache;
    const DetectionGraph g(4, {{0, 1}});
    gnn_forward(model, g, &cache);
    GnnModel grad = model.zeros_like();
    gnn_backward(model, cache, 0.0, grad);
    for (auto block : grad.parameters())
      for (double v : block) CHECK(v == 0.0);

    GnnCache empty_cache;
    gnn_forward(model, DetectionGraph(4), &empty_cache);
    GnnModel g2 = model.zeros_like();
    gnn_backward(model, empty_cache, 1.0, g2);
    for (const auto& layer : g2.layers()) {
      CHECK(layer.g2.weight.isZero(0.0));
      CHECK(layer.g2.bias.isZero(0.0));
    }
  }

  TEST_CASE("forward depends only on adjacency and index features") {
    Rng rng(5);
    const auto model = GnnModel::make(rng);
    const DetectionGraph a(5, {{0, 1}, {3, 4}});
    const DetectionGraph b(5, {{4, 3}, {1, 0}});
    CHECK(gnn_forward(model, a) == gnn_forward(model, b));
  }

  TEST_CASE("two disjoint copies of a graph keep the statistic") {
    Rng rng(6);
    const auto model = GnnModel::make(rng);
    const DetectionGraph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    DetectionGraph twice(8, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {4, 5}, {5, 6}, {6, 7}, {4, 7}});
    auto features = g.node_index_feature();
    features.insert(features.end(), g.node_index_feature().begin(), g.node_index_feature().end());
    twice.set_node_index_feature(features);
    CHECK(gnn_forward(model, twice) == doctest::Approx(gnn_forward(model, g)).epsilon(1e-12));
  }

  TEST_CASE("decision rule") {
    Rng rng(7);
    const auto model = GnnModel::make(rng);
    const DetectionGraph g(3, {{0, 1}});
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(decide(model, g, -inf) == Hypothesis::h1);
    CHECK(decide(model, g, inf) == Hypothesis::h0);
    const double s = gnn_forward(model, g);
    CHECK(decide(model, g, s) == Hypothesis::h0);
    CHECK(decide(model, g, std::nextafter(s, -inf)) == Hypothesis::h1);
  }

  TEST_CASE("single-class training data is rejected") {
    Rng rng(8);
    auto model = GnnModel::make(rng, 4, 1);
    std::vector<LabeledGraph> only_h0{{DetectionGraph(3), 0}, {DetectionGraph(3, {{0, 1}}), 0}};
    CHECK_THROWS_AS(train_gnn(model, only_h0, only_h0, nn::TrainConfig{}), ConfigError);
  }

  TEST_CASE("toy block vs interleaved graphs are separable, reproducibly") {
    Rng data_rng(9);
    std::vector<LabeledGraph> train, val;
    for (int i = 0; i < 300; ++i) train.push_back(toy_graph(i % 2 == 1, data_rng));
    for (int i = 0; i < 200; ++i) val.push_back(toy_graph(i % 2 == 1, data_rng));
    nn::TrainConfig cfg;
    cfg.max_epochs = 40;
    cfg.batch_size = 16;
    cfg.early_stop_patience = 10;
    Rng init(10);
    auto model = GnnModel::make(init);
    auto copy = model;
    train_gnn(model, train, val, cfg);
    std::size_t correct = 0;
    for (const auto& g : val) correct += (decide(model, g.graph, 0.0) == Hypothesis::h1) == (g.label == 1);
    CHECK(static_cast<double>(correct) / static_cast<double>(val.size()) >= 0.95);

    cfg.max_epochs = 2;
    cfg.early_stop_patience = 2;
    auto again = copy;
    train_gnn(copy, train, val, cfg);
    train_gnn(again, train, val, cfg);
    CHECK(gnn_forward(copy, val[0].graph) == gnn_forward(again, val[0].graph));
  }

  TEST_CASE("model file round trip") {
    Rng rng(11);
    const auto model = GnnModel::make(rng);
    const auto dir = testing::scratch_dir("gnn_json");
    save_gnn(dir / "gnn.json", model);
    const auto back = load_gnn(dir / "gnn.json");
    const DetectionGraph g(5, {{0, 1}, {1, 2}, {3, 4}});
    CHECK(gnn_forward(back, g) == gnn_forward(model, g));
    const auto j = to_json(model);
    CHECK(j.at("kind") == "gnn");
    CHECK(j.at("layers").size() == 3);
    CHECK(j.at("layers")[0].contains("g1"));
    CHECK(j.at("layers")[0].contains("g2"));
    CHECK(j.contains("readout"));
    auto wrong = j;
    wrong["kind"] = "pcd";
    CHECK_THROWS_AS(gnn_from_json(wrong), ConfigError);
  }

  TEST_CASE("width mismatches are rejected") {
    Rng rng(12);
    auto model = GnnModel::make(rng, 8, 2);
    auto layers = model.layers();
    layers[1].g1 = nn::DenseLayer::zeros(8 + 4, 8, nn::Activation::relu());
    CHECK_THROWS(GnnModel(layers, model.readout()));
  }
}
