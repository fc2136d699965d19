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

#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "helpers.hpp"
#include "phyguard/error.hpp"
#include "phyguard/evaluation.hpp"

using namespace phyguard;

namespace {

// P(X1 > X0) + P(X1 = X0) / 2 by direct pair counting.
double mann_whitney(const std::vector<double>& h0, const std::vector<double>& h1) {
  double wins = 0.0;
  for (double a : h0)
    for (double b : h1) wins += b > a ? 1.0 : (b == a ? 0.5 : 0.0);
  return wins / static_cast<double>(h0.size() * h1.size());
}

const DetectorSuite& small_suite() {
  static const DetectorSuite suite = [] {
    DetectorSuite s;
    s.pcd = testing::small_trained_pcd();
    Rng rng(11);
    s.gnn = GnnModel::make(rng, 8, 2);
    s.baselines = default_baselines();
    return s;
  }();
  return suite;
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.trials_per_hypothesis = 200;
  cfg.holdout_trials = 50;
  cfg.num_frames = 8;
  cfg.samples_per_frame = 50;
  return cfg;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("separable scores give a perfect ROC") {
    const std::vector<double> h0{0.1, 0.2, 0.3}, h1{0.5, 0.9};
    const auto curve = roc_from_scores(h0, h1);
    CHECK(curve.auc == doctest::Approx(1.0));
    CHECK(pd_at_pfa(curve, 0.0) == 1.0);
    CHECK(curve.points.front().pfa == 0.0);
    CHECK(curve.points.back().pfa == 1.0);
    CHECK(curve.points.back().pd == 1.0);
  }

  TEST_CASE("AUC equals the Mann-Whitney pair count, ties included") {
    Rng rng(1);
    std::uniform_int_distribution<int> small(0, 6);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> h0(1 + rep % 17), h1(1 + rep % 11);
      for (auto& v : h0) v = small(rng);
      for (auto& v : h1) v = small(rng) + rep % 3;
      CHECK(roc_from_scores(h0, h1).auc == doctest::Approx(mann_whitney(h0, h1)).epsilon(1e-12));
    }
  }

  TEST_CASE("label-independent scores give chance-level AUC") {
    Rng rng(2);
    std::normal_distribution<double> z;
    const std::size_t n = 2000;
    std::vector<double> h0(n), h1(n);
    for (auto& v : h0) v = z(rng);
    for (auto& v : h1) v = z(rng);
    const double sd = std::sqrt(static_cast<double>(2 * n + 1) / (12.0 * n * n));
    CHECK(std::abs(roc_from_scores(h0, h1).auc - 0.5) < 3.0 * sd);
  }

  TEST_CASE("ROC points are monotone in both coordinates") {
    Rng rng(3);
    std::normal_distribution<double> z;
    std::vector<double> h0(300), h1(300);
    for (auto& v : h0) v = z(rng);
    for (auto& v : h1) v = 0.8 + z(rng);
    const auto curve = roc_from_scores(h0, h1);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].pfa >= curve.points[i - 1].pfa);
      CHECK(curve.points[i].pd >= curve.points[i - 1].pd);
    }
  }

  TEST_CASE("GSD threshold is the smallest conservative observed value") {
    Rng rng(4);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<int> coarse(0, 20);
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<double> h0(250);
      for (auto& v : h0) v = rep % 2 ? z(rng) : coarse(rng);
      for (double target : {0.01, 0.1, 0.25}) {
        const double tau = threshold_for_pfa(h0, target);
        CHECK(std::find(h0.begin(), h0.end(), tau) != h0.end());
        CHECK(exceed_fraction(h0, tau) <= target + 1e-12);
        for (double v : h0) {
          if (v < tau) CHECK(exceed_fraction(h0, v) > target);
        }
      }
    }
  }

  TEST_CASE("Wilson interval") {
    const auto half = binomial_ci(50, 100);
    CHECK(half.low == doctest::Approx(0.4038).epsilon(1e-4));
    CHECK(half.high == doctest::Approx(0.5962).epsilon(1e-4));
    const auto none = binomial_ci(0, 10);
    CHECK(none.low == 0.0);
    CHECK(none.high == doctest::Approx(0.2775).epsilon(1e-3));
    CHECK(binomial_ci(10, 10).high == 1.0);
    CHECK(binomial_margin(0.1, 500) == doctest::Approx(1.96 * std::sqrt(0.09 / 500)).epsilon(1e-4));
    CHECK_THROWS_AS(binomial_ci(3, 2), PreconditionError);
  }

  TEST_CASE("Spearman correlation") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(spearman(x, std::vector<double>{2, 4, 8, 16, 32}) == doctest::Approx(1.0));
    CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(std::isnan(spearman(x, std::vector<double>{1, 1, 1, 1, 1})));
    CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 3, 4}) ==
          doctest::Approx(4.5 / std::sqrt(22.5)));
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), PreconditionError);
  }

  TEST_CASE("parallel_for covers every index and rethrows") {
    for (std::size_t workers : {1u, 3u, 0u}) {
      std::vector<int> hits(100, 0);
      parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i] += 1; });
      CHECK(std::count(hits.begin(), hits.end(), 1) == 100);
    }
    std::atomic<int> calls{0};
    parallel_for(0, 4, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
    CHECK_THROWS_AS(parallel_for(50, 3,
                                 [](std::size_t i) {
                                   if (i == 17) throw std::out_of_range("boom");
                                 }),
                    std::out_of_range);
  }

  TEST_CASE("evaluation seed streams are disjoint") {
    SeedLedger seeds(1);
    const auto h0 = seeds.derive("eval-h0");
    const auto h1 = seeds.derive("eval-h1");
    seeds.derive("eval-h0-holdout");
    for (std::uint64_t p = 0; p < 6; ++p) {
      seeds.derive("eval-h0-speed", p);
      seeds.derive("eval-h1-speed", p);
    }
    CHECK(seeds.disjoint());
    CHECK(seeds.to_json().size() == 15);
    std::set<std::uint64_t> trial_seeds;
    for (std::size_t i = 0; i < 1000; ++i) {
      trial_seeds.insert(trial_seed(h0, i));
      trial_seeds.insert(trial_seed(h1, i));
    }
    CHECK(trial_seeds.size() == 2000);
  }

  TEST_CASE("trial scores do not depend on the worker count") {
    const auto& ds = testing::small_dataset();
    const auto scenario = small_experiment().scenario();
    SynthConfig synth;
    synth.samples_per_frame = 50;
    const auto one = run_trials(ds, small_suite(), scenario, synth, Hypothesis::h1, 99, 12, 1);
    const auto three = run_trials(ds, small_suite(), scenario, synth, Hypothesis::h1, 99, 12, 3);
    CHECK(one == three);
    REQUIRE(one.size() == 4);
    for (std::size_t d = 1; d < 4; ++d)
      for (double c : one[d]) CHECK(c >= 1.0);
  }

  TEST_CASE("infeasible sweep points are skipped and reported") {
    auto cfg = small_experiment();
    cfg.speed_grid = {0.5, 100.0};
    SeedLedger seeds(5);
    SynthConfig synth;
    const auto result = run_pd_sweep(
        SweepAxis::speed, testing::small_dataset(), [](double) -> const DetectorSuite& { return small_suite(); },
        cfg, synth, seeds, 1);
    CHECK(result.skipped == std::vector<double>{100.0});
    REQUIRE(result.rows.size() == 4);
    for (const auto& row : result.rows) {
      CHECK(row.axis_value == 0.5);
      CHECK(row.ci.low <= row.pd);
      CHECK(row.pd <= row.ci.high);
    }
    std::ostringstream csv;
    write_sweep_csv(csv, result);
    CHECK(csv.str().rfind("axis,detector,pd,ci_low,ci_high\n0.5,gsd,", 0) == 0);
  }

  TEST_CASE("graph corpus alternates labels and is reproducible") {
    const auto& ds = testing::small_dataset();
    ScenarioConfig base = small_experiment().scenario();
    SynthConfig synth;
    synth.samples_per_frame = 50;
    const std::vector<double> speeds{0.0, 1.0};
    const auto a = make_graph_corpus(ds, Split::train, testing::small_trained_pcd(), base, synth, speeds, 10, 3, 1);
    const auto b = make_graph_corpus(ds, Split::train, testing::small_trained_pcd(), base, synth, speeds, 10, 3, 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].label == static_cast<int>(i % 2));
      CHECK(a[i].graph.edges() == b[i].graph.edges());
    }
  }

  TEST_CASE("experiment configuration is validated") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.trials_per_hypothesis = 199;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.target_pfa = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(experiment_config_from_json({{"num_frames", "many"}}), ConfigError);
    const auto back = experiment_config_from_json(to_json(ExperimentConfig{}));
    CHECK(back.speed_grid == ExperimentConfig{}.speed_grid);
    CHECK(sweep_axis_from_string("frames") == SweepAxis::num_frames);
    CHECK_THROWS_AS(sweep_axis_from_string("altitude"), ConfigError);
  }
}
