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

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "phyguard/synth.hpp"
#include "phyguard/trajectory.hpp"

namespace phyguard {

/// A point set in dB space, one row per frame.
using PointSet = std::vector<std::vector<double>>;

/// Cluster label per point; kNoise marks outliers.
inline constexpr int kNoise = -1;

struct DbscanParams {
  double eps = 6.0;     // dB
  std::size_t min_pts = 2;  // neighbourhood size including the point itself
};

struct OpticsParams {
  std::size_t min_pts = 2;
  double xi = 0.05;
};

struct BirchParams {
  std::size_t branching_factor = 50;
  double threshold = 6.0;  // dB, maximum subcluster radius
};

std::vector<int> dbscan(const PointSet& points, const DbscanParams& params);

/// OPTICS ordering with xi-steep cluster extraction (leaf clusters; points
/// outside every leaf are noise). Minimum cluster size equals min_pts.
std::vector<int> optics(const PointSet& points, const OpticsParams& params);

/// Reachability plot of the OPTICS ordering (first entry +inf).
struct OpticsOrdering {
  std::vector<std::size_t> order;
  std::vector<double> reachability;  // indexed by point
  std::vector<double> core_distance;
  std::vector<long> predecessor;     // -1 when none
};
OpticsOrdering optics_ordering(const PointSet& points, std::size_t min_pts);

/// BIRCH CF-tree; every leaf subcluster is a cluster (no global step).
std::vector<int> birch(const PointSet& points, const BirchParams& params);

/// Number of clusters with every noise point counted as its own cluster.
std::size_t count_clusters(std::span<const int> labels);

enum class ClusterAlgorithm { dbscan, optics, birch };

const char* to_string(ClusterAlgorithm a);
ClusterAlgorithm cluster_algorithm_from_string(const std::string& name);

/// Spoofing detector declaring H1 when the cluster count exceeds threshold.
struct ClusterDetector {
  ClusterAlgorithm algorithm = ClusterAlgorithm::dbscan;
  DbscanParams dbscan;
  OpticsParams optics;
  BirchParams birch;
  int threshold = 1;

  void validate() const;
};

/// Frames converted to dBm.
PointSet to_db_points(std::span<const RssVector> frames);

std::size_t cluster_count(const ClusterDetector& detector, std::span<const RssVector> frames);
std::size_t cluster_count(const ClusterDetector& detector, const FrameSequence& frames);

inline constexpr std::size_t kMinCalibrationTrials = 200;

/// Smallest integer tau >= 1 with #{count > tau} / n <= target_pfa.
int calibrate_threshold(std::span<const std::size_t> h0_counts, double target_pfa);

/// The detector's parameter block as found in the config file.
nlohmann::json to_json(const ClusterDetector& d);
ClusterDetector cluster_detector_from_json(ClusterAlgorithm algorithm, const nlohmann::json& j);

}  // namespace phyguard
