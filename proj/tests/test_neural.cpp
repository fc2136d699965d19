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

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "phyguard/error.hpp"
#include "phyguard/neural.hpp"

using namespace phyguard;
using namespace phyguard::nn;

namespace {

DenseNetwork random_net(std::vector<std::size_t> widths, std::vector<Activation> acts, std::uint64_t seed) {
  Rng rng(seed);
  return DenseNetwork::make(widths, acts, rng);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// L = sum(upstream .* net(x)); returns the largest relative error between the
// analytic and central-difference gradients over parameters and inputs.
double gradient_check(DenseNetwork net, const Matrix& x, const Matrix& upstream) {
  auto loss = [&](const DenseNetwork& n, const Matrix& in) {
    ForwardCache c;
    return (n.forward(in, c).array() * upstream.array()).sum();
  };
  ForwardCache cache;
  net.forward(x, cache);
  DenseNetwork grad = net.zeros_like();
  const Matrix dx = net.backward(cache, upstream, grad, true);

  const double h = 1e-5;
  double worst = 0.0;
  auto params = net.parameters();
  auto grads = grad.parameters();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double keep = params[b][i];
      params[b][i] = keep + h;
      const double up = loss(net, x);
      params[b][i] = keep - h;
      const double down = loss(net, x);
      params[b][i] = keep;
      worst = std::max(worst, testing::rel_error(grads[b][i], (up - down) / (2 * h)));
    }
  }
  Matrix xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = xp(i);
    xp(i) = keep + h;
    const double up = loss(net, xp);
    xp(i) = keep - h;
    const double down = loss(net, xp);
    xp(i) = keep;
    worst = std::max(worst, testing::rel_error(dx(i), (up - down) / (2 * h)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("identity layer passes its input through") {
    DenseLayer layer = DenseLayer::zeros(3, 3, Activation::identity());
    layer.weight.setIdentity();
    const DenseNetwork net({layer});
    const std::vector<double> x{1.5, -2.0, 0.25};
    CHECK(net.forward(x) == x);
  }

  TEST_CASE("relu of 2 * -3 + 1 is 0") {
    DenseLayer layer = DenseLayer::zeros(1, 1, Activation::relu());
    layer.weight(0, 0) = 2.0;
    layer.bias(0) = 1.0;
    const DenseNetwork net({layer});
    CHECK(net.forward(std::vector<double>{-3.0}) == std::vector<double>{0.0});
    CHECK(net.forward(std::vector<double>{3.0}) == std::vector<double>{7.0});
  }

  TEST_CASE("leaky relu slope") {
    CHECK(Activation::leaky_relu(0.01).apply(-1.0) == doctest::Approx(-0.01));
    CHECK(Activation::leaky_relu(0.01).derivative(-1.0) == 0.01);
    CHECK(Activation::relu().derivative(2.0) == 1.0);
  }

  TEST_CASE("dimension mismatch is rejected") {
    const auto net = random_net({3, 4, 1}, {Activation::relu(), Activation::identity()}, 1);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), PreconditionError);
    std::vector<DenseLayer> broken{DenseLayer::zeros(3, 4, Activation::relu()),
                                   DenseLayer::zeros(5, 1, Activation::identity())};
    CHECK_THROWS(DenseNetwork(broken));
  }

  TEST_CASE("binary cross-entropy on a logit") {
    CHECK(bce_with_logit(0.0, 1) == doctest::Approx(std::log(2.0)));
    CHECK(bce_with_logit(0.0, 0) == doctest::Approx(std::log(2.0)));
    CHECK(bce_with_logit(20.0, 1) == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
    CHECK(bce_with_logit(20.0, 1) == doctest::Approx(2.06e-9).epsilon(0.01));
    CHECK(std::isfinite(bce_with_logit(800.0, 0)));
    CHECK(bce_with_logit(800.0, 0) == doctest::Approx(800.0));
    CHECK(bce_with_logit(-800.0, 1) == doctest::Approx(800.0));
    CHECK(bce_gradient(0.0, 1) == doctest::Approx(-0.5));
    CHECK(bce_gradient(0.0, 0) == doctest::Approx(0.5));
  }

  TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const auto net = random_net({4, 6, 1}, {Activation::leaky_relu(), Activation::identity()}, 2);
    ForwardCache cache;
    net.forward(random_matrix(4, 5, 3), cache);
    DenseNetwork grad = net.zeros_like();
    net.backward(cache, Matrix::Zero(1, 5), grad);
    for (auto block : grad.parameters())
      for (double g : block) CHECK(g == 0.0);
  }

  TEST_CASE("single linear layer: dW is the input outer product and db is 1") {
    const auto net = random_net({3, 1}, {Activation::identity()}, 4);
    Matrix x(3, 1);
    x << 0.5, -1.0, 2.0;
    ForwardCache cache;
    net.forward(x, cache);
    DenseNetwork grad = net.zeros_like();
    net.backward(cache, Matrix::Ones(1, 1), grad);
    const auto& g = grad.layers()[0];
    for (int i = 0; i < 3; ++i) CHECK(g.weight(0, i) == x(i, 0));
    CHECK(g.bias(0) == 1.0);
  }

  TEST_CASE("gradients match central differences") {
    const auto net = random_net({4, 7, 5, 1}, {Activation::leaky_relu(0.1), Activation::relu(), Activation::identity()}, 5);
    CHECK(gradient_check(net, random_matrix(4, 3, 6), random_matrix(1, 3, 7)) < 1e-4);
    const auto two = random_net({3, 8, 2}, {Activation::leaky_relu(), Activation::identity()}, 8);
    CHECK(gradient_check(two, random_matrix(3, 4, 9), random_matrix(2, 4, 10)) < 1e-4);
  }

  TEST_CASE("batch output does not depend on a sample's position") {
    const auto net = random_net({6, 16, 16, 1}, {Activation::leaky_relu(), Activation::leaky_relu(), Activation::identity()}, 11);
    const Matrix x = random_matrix(6, 13, 12);
    const Matrix full = net.forward(x);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto single = net.forward(std::span<const double>(x.col(j).data(), 6));
      CHECK(single[0] == full(0, j));
      Matrix shifted(6, 3);
      shifted << x.col((j + 1) % x.cols()), x.col((j + 2) % x.cols()), x.col(j);
      CHECK(net.forward(shifted)(0, 2) == full(0, j));
    }
  }

  TEST_CASE("finite inputs give finite outputs") {
    const auto net = random_net({2, 32, 1}, {Activation::leaky_relu(), Activation::identity()}, 13);
    for (double a : {-1e6, -1.0, 0.0, 1e-300, 1e6}) {
      CHECK(std::isfinite(net.forward(std::vector<double>{a, -a})[0]));
    }
  }

  TEST_CASE("serialization round trip is bit-identical") {
    const auto net = random_net({5, 9, 1}, {Activation::leaky_relu(0.02), Activation::identity()}, 14);
    const auto text = to_json(net).dump();
    const auto back = network_from_json(nlohmann::json::parse(text));
    CHECK(back == net);
    const auto dir = testing::scratch_dir("neural_json");
    save_json(dir / "net.json", to_json(net));
    const auto loaded = network_from_json(load_json(dir / "net.json"));
    const Matrix x = random_matrix(5, 4, 15);
    CHECK(loaded.forward(x) == net.forward(x));
    auto j = to_json(net);
    j["format_version"] = 99;
    CHECK_THROWS(network_from_json(j));
  }

  TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.early_stop_patience = 300;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.max_epochs = 0;
    CHECK_NOTHROW(c.validate());
  }

  struct ToyData {
    LabeledSet train;
    LabeledSet val;
  };

  ToyData separable(std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto make = [&](std::size_t n) {
      LabeledSet s;
      s.inputs.resize(2, static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n;) {
        const double a = u(rng), b = u(rng);
        const double margin = a + 2.0 * b - 0.3;
        if (std::abs(margin) < 0.05) continue;
        s.inputs(0, static_cast<Eigen::Index>(i)) = a;
        s.inputs(1, static_cast<Eigen::Index>(i)) = b;
        s.labels.push_back(margin > 0 ? 1 : 0);
        ++i;
      }
      return s;
    };
    return {make(600), make(300)};
  }

  TEST_CASE("separable toy data is learned") {
    const auto data = separable(21);
    auto net = random_net({2, 16, 1}, {Activation::relu(), Activation::identity()}, 22);
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    const auto history = train(net, data.train, data.val, cfg);
    CHECK(history.best_val_accuracy >= 0.99);
    CHECK(history.epochs.size() <= 50);
  }

  TEST_CASE("zero epochs keeps the initial network") {
    const auto data = separable(23);
    auto net = random_net({2, 4, 1}, {Activation::relu(), Activation::identity()}, 24);
    const auto before = net;
    TrainConfig cfg;
    cfg.max_epochs = 0;
    const auto history = train(net, data.train, data.val, cfg);
    CHECK(net == before);
    CHECK(history.epochs.empty());
  }

  TEST_CASE("training is deterministic in its seed") {
    const auto data = separable(25);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.early_stop_patience = 5;
    auto a = random_net({2, 8, 1}, {Activation::relu(), Activation::identity()}, 26);
    auto b = a;
    train(a, data.train, data.val, cfg);
    train(b, data.train, data.val, cfg);
    CHECK(a == b);
    auto c = random_net({2, 8, 1}, {Activation::relu(), Activation::identity()}, 26);
    cfg.seed = 99;
    train(c, data.train, data.val, cfg);
    CHECK_FALSE(a == c);
  }

  TEST_CASE("NaN loss aborts training") {
    const auto data = separable(27);
    auto net = random_net({2, 4, 1}, {Activation::relu(), Activation::identity()}, 28);
    net.layers()[1].bias(0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.early_stop_patience = 3;
    CHECK_THROWS_AS(train(net, data.train, data.val, cfg), NumericalError);
  }

  TEST_CASE("history CSV") {
    FitHistory h;
    h.epochs.push_back({1, 0.5, 0.4, 0.9});
    std::ostringstream out;
    write_history_csv(out, h);
    CHECK(out.str().rfind("epoch,train_loss,val_loss,val_accuracy\n1,", 0) == 0);
  }
}
