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

#include "phyguard/survey.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "phyguard/error.hpp"
#include "phyguard/geometry.hpp"
#include "phyguard/random.hpp"

namespace phyguard {
namespace {

struct PlaneWave {
  double kx, ky, phase;
};

struct AccessPoint {
  int id;
  int floor;
  Point2 xy;
  double tx_dbm;
  std::vector<PlaneWave> shadowing;
};

double shadowing_db(const AccessPoint& ap, const Point2& p, double sigma) {
  double sum = 0.0;
  for (const auto& w : ap.shadowing) sum += std::cos(w.kx * p.x + w.ky * p.y + w.phase);
  const double value = sigma * std::sqrt(2.0 / static_cast<double>(ap.shadowing.size())) * sum;
  return std::clamp(value, -2.0 * sigma, 2.0 * sigma);
}

}  // namespace

void write_synthetic_survey(std::ostream& out, const SurveyConfig& config) {
  require(!config.locations_per_floor.empty(), "survey needs at least one floor");
  require(config.backbone_aps <= config.num_aps, "more backbone access points than access points");
  require(config.floor_width_m > 0.0 && config.floor_depth_m > 0.0, "floor dimensions must be positive");
  require(config.shadowing_components > 0, "shadowing needs at least one component");

  Rng rng = make_rng(config.seed, "survey");
  std::uniform_real_distribution<double> ux(0.0, config.floor_width_m);
  std::uniform_real_distribution<double> uy(0.0, config.floor_depth_m);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int num_floors = static_cast<int>(config.locations_per_floor.size());

  auto make_shadowing = [&] {
    std::vector<PlaneWave> waves(config.shadowing_components);
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    for (auto& w : waves) {
      const double k = 2.0 * std::numbers::pi / (config.shadowing_wavelength_m * scale(rng));
      const double theta = angle(rng);
      w = {k * std::cos(theta), k * std::sin(theta), angle(rng)};
    }
    return waves;
  };

  std::vector<AccessPoint> aps;
  aps.reserve(config.num_aps);
  // Backbone access points sit on a coarse grid over floor 1.
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(config.backbone_aps))));
  for (std::size_t b = 0; b < config.backbone_aps; ++b) {
    const std::size_t rows = (config.backbone_aps + cols - 1) / cols;
    const double x = config.floor_width_m * (static_cast<double>(b % cols) + 0.5) / static_cast<double>(cols);
    const double y = config.floor_depth_m * (static_cast<double>(b / cols) + 0.5) / static_cast<double>(rows);
    aps.push_back({static_cast<int>(aps.size()) + 1, 1, {x, y}, config.backbone_tx_dbm, make_shadowing()});
  }
  std::uniform_int_distribution<int> pick_floor(1, num_floors);
  std::uniform_real_distribution<double> tx(config.min_tx_dbm, config.max_tx_dbm);
  while (aps.size() < config.num_aps) {
    const int floor = pick_floor(rng);
    const Point2 xy{ux(rng), uy(rng)};
    const double power = tx(rng);
    aps.push_back({static_cast<int>(aps.size()) + 1, floor, xy, power, make_shadowing()});
  }

  out << "location_id,x,y,floor,ap_id,rss_dbm\n";
  int next_id = 1;
  for (int floor = 1; floor <= num_floors; ++floor) {
    const std::size_t wanted = config.locations_per_floor[static_cast<std::size_t>(floor - 1)];
    std::vector<Point2> placed;
    std::size_t attempts = 0;
    while (placed.size() < wanted) {
      if (++attempts > 1000 * (wanted + 1)) {
        throw ConfigError("cannot place " + std::to_string(wanted) + " locations with spacing " +
                          std::to_string(config.min_spacing_m) + " m on floor " + std::to_string(floor));
      }
      // Centimetre grid, like a hand-annotated survey.
      const Point2 p{std::round(ux(rng) * 100.0) / 100.0, std::round(uy(rng) * 100.0) / 100.0};
      const bool crowded = std::any_of(placed.begin(), placed.end(), [&](const Point2& q) {
        return distance(p, q) < config.min_spacing_m;
      });
      if (!crowded) placed.push_back(p);
    }

    for (const auto& p : placed) {
      const int id = next_id++;
      for (const auto& ap : aps) {
        const double d = std::max(1.0, distance(p, ap.xy));
        const double loss = config.reference_loss_db + 10.0 * config.path_loss_exponent * std::log10(d) +
                            config.floor_loss_db * std::abs(floor - ap.floor);
        // Multipath is drawn for every pair so the stream does not depend on
        // which access points end up audible.
        const double multipath = std::clamp(config.multipath_sigma_db * normal(rng),
                                            -2.0 * config.multipath_sigma_db, 2.0 * config.multipath_sigma_db);
        const double upper = ap.tx_dbm - loss + 2.0 * (config.shadowing_sigma_db + config.multipath_sigma_db);
        if (upper < config.sensitivity_dbm) continue;
        const double rss =
            std::round(ap.tx_dbm - loss + shadowing_db(ap, p, config.shadowing_sigma_db) + multipath);
        if (rss < config.sensitivity_dbm) continue;
        out << id << ',' << p.x << ',' << p.y << ',' << floor << ',' << ap.id << ',' << rss << '\n';
      }
    }
  }
}

}  // namespace phyguard
