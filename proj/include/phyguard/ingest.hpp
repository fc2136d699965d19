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
#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "phyguard/geometry.hpp"

namespace phyguard {

/// dBm <-> linear watts.
double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

struct MeasurementLocation {
  int id = 0;
  Point2 xy;
  /// Linear power (W) at each selected receiver, same order as
  /// FingerprintDataset::selected_aps().
  std::vector<double> true_rss;
};

enum class Split : std::uint8_t { unassigned, train, val, test };

const char* to_string(Split split);

struct IngestConfig {
  int floor = 1;
  std::size_t num_aps = 5;
};

/// One CSV row: an access point heard at a location.
struct Observation {
  int location_id = 0;
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  int ap_id = 0;
  double rss_dbm = 0.0;
};

std::vector<Observation> parse_observations(std::istream& in);

/// The `count` access points heard at the most distinct locations, ties
/// broken by ascending id. Only observations on `floor` are considered.
std::vector<int> select_access_points(const std::vector<Observation>& rows, int floor,
                                      std::size_t count);

/// Ground-truth radio map restricted to one floor and M access points.
/// Immutable apart from split assignment.
class FingerprintDataset {
 public:
  FingerprintDataset(std::vector<MeasurementLocation> locations, std::vector<int> selected_aps);

  const std::vector<MeasurementLocation>& locations() const { return locations_; }
  const std::vector<int>& selected_aps() const { return selected_aps_; }
  std::size_t size() const { return locations_.size(); }
  std::size_t num_aps() const { return selected_aps_.size(); }

  Split split_of(std::size_t index) const { return split_[index]; }
  const std::vector<Split>& split() const { return split_; }
  void assign_split(std::vector<Split> split);

  /// Indices (into locations()) of the locations in `split`, ascending.
  std::vector<std::size_t> indices(Split split) const;
  BoundingBox bounding_box(Split split) const;

 private:
  std::vector<MeasurementLocation> locations_;
  std::vector<int> selected_aps_;
  std::vector<Split> split_;
};

/// Loads `location_id,x,y,floor,ap_id,rss_dbm` rows. Throws ParseError,
/// ConfigError (too few access points) or InsufficientDataError (fewer than
/// ten usable locations).
FingerprintDataset load_fingerprints(const std::filesystem::path& path, const IngestConfig& config);
FingerprintDataset load_fingerprints(std::istream& in, const IngestConfig& config);
FingerprintDataset build_dataset(const std::vector<Observation>& rows, const IngestConfig& config);

/// Shuffles locations with `seed`; |test| = round(test_frac * D), then
/// |val| = round(val_frac * D) from the remainder; everything else trains.
FingerprintDataset split_locations(FingerprintDataset ds, double test_frac, double val_frac,
                                   std::uint64_t seed);

/// `location_id,split` audit file.
void write_split_csv(std::ostream& out, const FingerprintDataset& ds);

inline constexpr std::size_t kMinLocations = 10;

}  // namespace phyguard
