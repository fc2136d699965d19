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

namespace phyguard {

/// Parameters of the synthetic multi-floor site survey. Defaults mimic the
/// size of a large crowdsourced WiFi survey: 992 access points, 4846
/// locations over four floors, 648 of them on floor 1.
struct SurveyConfig {
  std::uint64_t seed = 1;
  std::vector<std::size_t> locations_per_floor = {648, 1400, 1400, 1398};
  std::size_t num_aps = 992;
  double floor_width_m = 80.0;
  double floor_depth_m = 40.0;
  double min_spacing_m = 1.0;

  // Log-distance path loss, PL(d) = reference_loss + 10 n log10(d / 1 m).
  double reference_loss_db = 40.0;
  double path_loss_exponent = 3.0;
  double floor_loss_db = 15.0;

  // Spatially correlated shadowing (sum of random plane waves) and
  // per-location multipath. Both are clipped at two standard deviations.
  double shadowing_sigma_db = 6.0;
  double shadowing_wavelength_m = 8.0;
  std::size_t shadowing_components = 16;
  double multipath_sigma_db = 4.0;

  double sensitivity_dbm = -100.0;

  // High-power access points spread over floor 1; they are heard everywhere
  // on that floor.
  std::size_t backbone_aps = 5;
  double backbone_tx_dbm = 20.0;
  double min_tx_dbm = -5.0;
  double max_tx_dbm = 15.0;
};

/// Writes a `location_id,x,y,floor,ap_id,rss_dbm` survey (integer dBm, only
/// access points above the sensitivity are listed). Deterministic in
/// `config.seed`.
void write_synthetic_survey(std::ostream& out, const SurveyConfig& config);

}  // namespace phyguard
