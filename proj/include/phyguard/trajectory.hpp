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

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "phyguard/geometry.hpp"
#include "phyguard/ingest.hpp"
#include "phyguard/synth.hpp"

namespace phyguard {

enum class Hypothesis : std::uint8_t { h0, h1 };

const char* to_string(Hypothesis h);

struct ScenarioConfig {
  std::size_t num_frames = 30;  // K
  double frame_rate = 10.0;     // frames per second
  double speed = 1.0;           // m/s, shared by both users
  Hypothesis hypothesis = Hypothesis::h0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Distance covered between the first and the last frame.
  double segment_length() const { return speed * static_cast<double>(num_frames - 1) / frame_rate; }
};

inline constexpr int kTrajectoryAttempts = 1000;

/// Straight constant-speed path sampled at t = k / frame_rate, k = 0..K-1.
/// The start point is uniform in `region` and the heading uniform in
/// [0, 2pi); both are redrawn until the whole segment fits.
std::vector<Point2> gen_trajectory(const BoundingBox& region, const ScenarioConfig& config, Rng& rng);

struct SnappedFrames {
  std::vector<std::size_t> location_index;  // into ds.locations()
  std::vector<RssVector> features;
};

/// Nearest location of `split` for each point (ties: lowest id), plus one
/// fresh finite-sample estimate of its true RSS.
SnappedFrames snap_to_dataset(const std::vector<Point2>& points, const FingerprintDataset& ds, Split split,
                              const SynthConfig& synth, Rng& rng);

/// Frame sequence F with its ground truth.
struct FrameSequence {
  std::vector<RssVector> features;
  Hypothesis label = Hypothesis::h0;
  std::vector<int> user_of_frame;  // 1 or 2
  std::vector<Point2> true_locations;
  std::vector<std::size_t> snap_index;

  std::size_t size() const { return features.size(); }
};

/// H0: one user. H1: two independent users merged by a fair coin per frame.
/// Deterministic in config.seed.
FrameSequence gen_sequence(const FingerprintDataset& ds, Split split, const ScenarioConfig& config,
                           const SynthConfig& synth);

/// `frame_idx,user,true_x,true_y,snap_id,rss_1..rss_M` (RSS in dBm).
void write_sequence_csv(std::ostream& out, const FrameSequence& seq, const FingerprintDataset& ds);

}  // namespace phyguard
