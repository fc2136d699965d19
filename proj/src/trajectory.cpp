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

#include "phyguard/trajectory.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "phyguard/error.hpp"

namespace phyguard {

const char* to_string(Hypothesis h) { return h == Hypothesis::h0 ? "H0" : "H1"; }

void ScenarioConfig::validate() const {
  if (num_frames < 2) throw ConfigError("a frame sequence needs at least two frames");
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw ConfigError("frame_rate must be positive");
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw ConfigError("speed must be nonnegative");
}

std::vector<Point2> gen_trajectory(const BoundingBox& region, const ScenarioConfig& config, Rng& rng) {
  config.validate();
  require(region.width() >= 0.0 && region.height() >= 0.0, "empty region");
  std::uniform_real_distribution<double> ux(region.lo.x, region.hi.x);
  std::uniform_real_distribution<double> uy(region.lo.y, region.hi.y);
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  const double length = config.segment_length();

  for (int attempt = 0; attempt < kTrajectoryAttempts; ++attempt) {
    const Point2 start{ux(rng), uy(rng)};
    const double theta = heading(rng);
    const Point2 dir{std::cos(theta), std::sin(theta)};
    // The region is convex, so both endpoints inside means the segment is.
    if (!region.contains({start.x + dir.x * length, start.y + dir.y * length})) continue;
    std::vector<Point2> points(config.num_frames);
    for (std::size_t k = 0; k < config.num_frames; ++k) {
      const double travelled = config.speed * static_cast<double>(k) / config.frame_rate;
      points[k] = {start.x + dir.x * travelled, start.y + dir.y * travelled};
    }
    return points;
  }
  throw InfeasibleScenarioError("no " + std::to_string(length) + " m segment fits in the " +
                                std::to_string(region.width()) + " x " + std::to_string(region.height()) +
                                " m region after " + std::to_string(kTrajectoryAttempts) + " attempts");
}

SnappedFrames snap_to_dataset(const std::vector<Point2>& points, const FingerprintDataset& ds, Split split,
                              const SynthConfig& synth, Rng& rng) {
  const auto candidates = ds.indices(split);
  if (candidates.empty()) throw InsufficientDataError(std::string("split '") + to_string(split) + "' is empty");
  SnappedFrames out;
  for (const auto& p : points) {
    std::size_t best = candidates.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (auto idx : candidates) {
      const auto& loc = ds.locations()[idx];
      const double d = distance(p, loc.xy);
      if (d < best_d || (d == best_d && loc.id < ds.locations()[best].id)) {
        best = idx;
        best_d = d;
      }
    }
    out.location_index.push_back(best);
    out.features.push_back(synth_estimate(ds.locations()[best].true_rss, synth, rng));
  }
  return out;
}

FrameSequence gen_sequence(const FingerprintDataset& ds, Split split, const ScenarioConfig& config,
                           const SynthConfig& synth) {
  config.validate();
  const BoundingBox region = ds.bounding_box(split);
  const std::size_t k = config.num_frames;

  struct User {
    std::vector<Point2> path;
    SnappedFrames frames;
  };
  auto make_user = [&](std::string_view stream) {
    Rng path_rng = make_rng(config.seed, stream);
    Rng rss_rng = make_rng(config.seed, std::string(stream) + "-rss");
    User u;
    u.path = gen_trajectory(region, config, path_rng);
    u.frames = snap_to_dataset(u.path, ds, split, synth, rss_rng);
    return u;
  };

  FrameSequence seq;
  seq.label = config.hypothesis;
  const User first = make_user("user1");
  if (config.hypothesis == Hypothesis::h0) {
    seq.features = first.frames.features;
    seq.user_of_frame.assign(k, 1);
    seq.true_locations = first.path;
    seq.snap_index = first.frames.location_index;
    return seq;
  }

  const User second = make_user("user2");
  Rng coin_rng = make_rng(config.seed, "merge");
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < k; ++i) {
    const bool take_second = coin(coin_rng);
    const User& u = take_second ? second : first;
    seq.features.push_back(u.frames.features[i]);
    seq.user_of_frame.push_back(take_second ? 2 : 1);
    seq.true_locations.push_back(u.path[i]);
    seq.snap_index.push_back(u.frames.location_index[i]);
  }
  return seq;
}

void write_sequence_csv(std::ostream& out, const FrameSequence& seq, const FingerprintDataset& ds) {
  out << "frame_idx,user,true_x,true_y,snap_id";
  for (std::size_t i = 0; i < ds.num_aps(); ++i) out << ",rss_" << (i + 1);
  out << '\n';
  out.precision(10);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    out << k << ',' << seq.user_of_frame[k] << ',' << seq.true_locations[k].x << ',' << seq.true_locations[k].y
        << ',' << ds.locations()[seq.snap_index[k]].id;
    for (double w : seq.features[k]) out << ',' << watts_to_dbm(w);
    out << '\n';
  }
}

}  // namespace phyguard
