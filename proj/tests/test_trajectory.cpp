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
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "phyguard/error.hpp"
#include "phyguard/graph.hpp"
#include "phyguard/trajectory.hpp"

using namespace phyguard;

namespace {

const BoundingBox kRegion{{0.0, 0.0}, {20.0, 10.0}};

ScenarioConfig scenario(double speed, std::uint64_t seed = 1, Hypothesis h = Hypothesis::h0) {
  ScenarioConfig c;
  c.speed = speed;
  c.seed = seed;
  c.hypothesis = h;
  return c;
}

}  // namespace

TEST_SUITE("trajectory") {
  TEST_CASE("a static user stays put") {
    Rng rng(1);
    const auto path = gen_trajectory(kRegion, scenario(0.0), rng);
    REQUIRE(path.size() == 30);
    for (const auto& p : path) CHECK(p == path.front());
    CHECK(kRegion.contains(path.front()));
  }

  TEST_CASE("1 m/s at 10 frames/s over 30 frames covers 2.9 m") {
    CHECK(scenario(1.0).segment_length() == doctest::Approx(2.9));
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
      const auto path = gen_trajectory(kRegion, scenario(1.0), rng);
      CHECK(distance(path.front(), path.back()) == doctest::Approx(2.9).epsilon(1e-9));
      for (std::size_t k = 1; k < path.size(); ++k) {
        CHECK(distance(path[k - 1], path[k]) == doctest::Approx(0.1).epsilon(1e-9));
      }
      for (const auto& p : path) CHECK(kRegion.contains(p));
    }
  }

  TEST_CASE("trajectories are reproducible") {
    Rng a(7), b(7);
    CHECK(gen_trajectory(kRegion, scenario(2.0), a) == gen_trajectory(kRegion, scenario(2.0), b));
  }

  TEST_CASE("a segment longer than the region is infeasible") {
    Rng rng(3);
    CHECK_THROWS_AS(gen_trajectory(kRegion, scenario(100.0), rng), InfeasibleScenarioError);
  }

  TEST_CASE("scenario validation") {
    auto c = scenario(1.0);
    c.num_frames = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = scenario(-1.0);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = scenario(1.0);
    c.frame_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("snapping picks the nearest location with ties to the lower id") {
    const auto ds = testing::all_in(testing::grid_dataset(4, 3, 2.0, 3), Split::test);
    Rng rng(4);
    const auto exact = snap_to_dataset({ds.locations()[5].xy}, ds, Split::test, SynthConfig{}, rng);
    CHECK(exact.location_index == std::vector<std::size_t>{5});

    // Grid ids run row by row: id 3 sits at (4, 0) and id 7 at (4, 2).
    REQUIRE(ds.locations()[2].id == 3);
    REQUIRE(ds.locations()[6].id == 7);
    const auto tie = snap_to_dataset({{4.0, 1.0}}, ds, Split::test, SynthConfig{}, rng);
    CHECK(ds.locations()[tie.location_index[0]].id == 3);

    const auto constant = snap_to_dataset(std::vector<Point2>(30, {3.1, 3.9}), ds, Split::test, SynthConfig{}, rng);
    CHECK(std::set<std::size_t>(constant.location_index.begin(), constant.location_index.end()).size() == 1);
    std::set<double> first_component;
    for (const auto& f : constant.features) first_component.insert(f[0]);
    CHECK(first_component.size() == 30);  // fresh estimate per frame

    CHECK_THROWS_AS(snap_to_dataset({{0, 0}}, ds, Split::train, SynthConfig{}, rng), InsufficientDataError);
  }

  TEST_CASE("H0 sequences belong to one user") {
    const auto& ds = testing::small_dataset();
    const auto seq = gen_sequence(ds, Split::test, scenario(1.0, 5), SynthConfig{});
    CHECK(seq.size() == 30);
    CHECK(seq.label == Hypothesis::h0);
    CHECK(seq.user_of_frame == std::vector<int>(30, 1));
    for (auto idx : seq.snap_index) CHECK(ds.split_of(idx) == Split::test);
  }

  TEST_CASE("H1 merges two users by fair coin") {
    const auto& ds = testing::small_dataset();
    double total = 0.0;
    const int runs = 400;
    int both = 0;
    for (int s = 0; s < runs; ++s) {
      const auto seq = gen_sequence(ds, Split::test, scenario(1.0, 1000 + s, Hypothesis::h1), SynthConfig{});
      REQUIRE(seq.user_of_frame.size() == 30);
      const auto ones = std::count(seq.user_of_frame.begin(), seq.user_of_frame.end(), 1);
      total += static_cast<double>(ones);
      both += ones > 0 && ones < 30;
    }
    // Mean 15, sd of the mean sqrt(7.5 / 400).
    CHECK(std::abs(total / runs - 15.0) < 3.0 * std::sqrt(7.5 / runs));
    CHECK(both == runs);
  }

  TEST_CASE("sequences are deterministic and the two users independent") {
    const auto& ds = testing::small_dataset();
    const auto cfg = scenario(1.0, 77, Hypothesis::h1);
    const auto a = gen_sequence(ds, Split::test, cfg, SynthConfig{});
    const auto b = gen_sequence(ds, Split::test, cfg, SynthConfig{});
    CHECK(a.features == b.features);
    CHECK(a.user_of_frame == b.user_of_frame);
    CHECK(a.true_locations == b.true_locations);

    Point2 start1{}, start2{};
    bool seen1 = false, seen2 = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a.user_of_frame[k] == 1 && !seen1) {
        start1 = a.true_locations[k];
        seen1 = true;
      }
      if (a.user_of_frame[k] == 2 && !seen2) {
        start2 = a.true_locations[k];
        seen2 = true;
      }
    }
    REQUIRE((seen1 && seen2));
    CHECK_FALSE(start1 == start2);
  }

  TEST_CASE("static H0 frames at large N form a near-complete graph") {
    const auto& ds = testing::small_dataset();
    const auto& pcd = testing::small_trained_pcd();
    SynthConfig synth;
    synth.samples_per_frame = 10000;
    std::size_t edges = 0, possible = 0;
    for (int s = 0; s < 10; ++s) {
      const auto seq = gen_sequence(ds, Split::test, scenario(0.0, 300 + s), synth);
      const auto g = build_graph(seq, pcd);
      edges += g.num_edges();
      possible += 30 * 29 / 2;
    }
    CHECK(static_cast<double>(edges) / static_cast<double>(possible) >= 0.99);
  }

  TEST_CASE("scenario dump") {
    const auto& ds = testing::small_dataset();
    const auto seq = gen_sequence(ds, Split::test, scenario(1.0, 3, Hypothesis::h1), SynthConfig{});
    std::ostringstream out;
    write_sequence_csv(out, seq, ds);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "frame_idx,user,true_x,true_y,snap_id,rss_1,rss_2,rss_3,rss_4,rss_5");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 30);
  }
}
