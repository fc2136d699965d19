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

#include "phyguard/synth.hpp"

#include <cmath>
#include <limits>

#include "phyguard/error.hpp"

namespace phyguard {

void SynthConfig::validate() const {
  if (samples_per_frame < 1) throw ConfigError("samples_per_frame must be >= 1");
  if (estimates_per_location < 1) throw ConfigError("estimates_per_location must be >= 1");
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor)) throw ConfigError("noise_floor must be >= 0");
}

double chi2_sample(int dof, Rng& rng) {
  require(dof >= 1, "chi-squared degrees of freedom must be >= 1");
  std::gamma_distribution<double> gamma(0.5 * dof, 2.0);
  return gamma(rng);
}

RssVector synth_estimate(std::span<const double> true_rss, int n_samples, Rng& rng) {
  require(n_samples >= 1, "number of samples must be >= 1");
  require(!true_rss.empty(), "empty RSS vector");
  const int dof = 2 * n_samples;
  RssVector out(true_rss.size());
  for (std::size_t i = 0; i < true_rss.size(); ++i) {
    require(std::isfinite(true_rss[i]) && true_rss[i] > 0.0, "true RSS entries must be positive and finite");
    double draw = chi2_sample(dof, rng) / dof;
    // The draw underflows to zero with negligible probability for small N;
    // keep the output strictly positive.
    if (draw <= 0.0) draw = std::numeric_limits<double>::min();
    out[i] = true_rss[i] * draw;
  }
  return out;
}

RssVector synth_estimate(std::span<const double> true_rss, const SynthConfig& config, Rng& rng) {
  if (config.noise_floor == 0.0) return synth_estimate(true_rss, config.samples_per_frame, rng);
  std::vector<double> with_noise(true_rss.begin(), true_rss.end());
  for (double& w : with_noise) w += config.noise_floor;
  return synth_estimate(with_noise, config.samples_per_frame, rng);
}

double estimate_rss_from_samples(std::span<const std::complex<double>> samples) {
  require(!samples.empty(), "cannot estimate RSS from an empty sample set");
  double sum = 0.0;
  for (const auto& s : samples) sum += std::norm(s);
  return sum / static_cast<double>(samples.size());
}

EstimateBank::EstimateBank(const FingerprintDataset& ds, Split split, const SynthConfig& config, Rng& rng)
    : location_index_(ds.indices(split)),
      per_location_(static_cast<std::size_t>(config.estimates_per_location)),
      num_aps_(ds.num_aps()) {
  config.validate();
  values_.reserve(location_index_.size() * per_location_ * num_aps_);
  for (auto idx : location_index_) {
    const auto& truth = ds.locations()[idx].true_rss;
    for (std::size_t e = 0; e < per_location_; ++e) {
      const auto est = synth_estimate(truth, config, rng);
      values_.insert(values_.end(), est.begin(), est.end());
    }
  }
}

std::span<const double> EstimateBank::estimate(std::size_t slot, std::size_t e) const {
  return {values_.data() + (slot * per_location_ + e) * num_aps_, num_aps_};
}

}  // namespace phyguard
