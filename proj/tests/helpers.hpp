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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "phyguard/ingest.hpp"
#include "phyguard/pcd.hpp"
#include "phyguard/random.hpp"

namespace phyguard::testing {

/// Grid of nx * ny locations `spacing` metres apart. Access point a sits at a
/// corner-ish position and the RSS follows a log-distance law, so nearby
/// locations have similar vectors and distant ones differ by many dB.
inline FingerprintDataset grid_dataset(std::size_t nx, std::size_t ny, double spacing, std::size_t num_aps) {
  std::vector<MeasurementLocation> locs;
  const double w = spacing * static_cast<double>(nx - 1);
  const double h = spacing * static_cast<double>(ny - 1);
  std::vector<Point2> aps;
  for (std::size_t a = 0; a < num_aps; ++a) {
    const double t = 2.0 * 3.14159265358979 * static_cast<double>(a) / static_cast<double>(num_aps);
    aps.push_back({0.5 * w + 0.6 * w * std::cos(t), 0.5 * h + 0.6 * h * std::sin(t)});
  }
  int id = 1;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      MeasurementLocation loc;
      loc.id = id++;
      loc.xy = {spacing * static_cast<double>(i), spacing * static_cast<double>(j)};
      for (const auto& ap : aps) {
        const double d = std::max(1.0, distance(loc.xy, ap));
        loc.true_rss.push_back(dbm_to_watts(-30.0 - 35.0 * std::log10(d)));
      }
      locs.push_back(std::move(loc));
    }
  }
  std::vector<int> ids(num_aps);
  for (std::size_t a = 0; a < num_aps; ++a) ids[a] = static_cast<int>(a + 1);
  return FingerprintDataset(std::move(locs), std::move(ids));
}

/// Every location assigned to `split`.
inline FingerprintDataset all_in(FingerprintDataset ds, Split split) {
  ds.assign_split(std::vector<Split>(ds.size(), split));
  return ds;
}

/// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor so
/// that round-off on vanishing gradients is not reported as a mismatch.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("phyguard_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random RSS vector with entries uniform in dBm over [-95, -30].
inline RssVector random_rss(std::size_t m, Rng& rng) {
  std::uniform_real_distribution<double> dbm(-95.0, -30.0);
  RssVector v(m);
  for (double& x : v) x = dbm_to_watts(dbm(rng));
  return v;
}

/// Standardized network input of the ordered pair (a, b).
inline nn::Matrix standardized_column(const PcdModel& model, const RssVector& a, const RssVector& b) {
  const auto raw = featurize_pair(a, b, model.epsilon_log);
  nn::Matrix col(static_cast<Eigen::Index>(raw.size()), 1);
  for (std::size_t f = 0; f < raw.size(); ++f) {
    col(static_cast<Eigen::Index>(f), 0) = (raw[f] - model.feature_mean[f]) / model.feature_scale[f];
  }
  return col;
}

/// Small PCD trained on a grid dataset; shared by several suites.
const PcdModel& small_trained_pcd();
const FingerprintDataset& small_dataset();

}  // namespace phyguard::testing
