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

#include <complex>
#include <span>
#include <vector>

#include "phyguard/ingest.hpp"
#include "phyguard/random.hpp"

namespace phyguard {

/// One frame's RSS at M receivers, in watts. Entries are strictly positive.
using RssVector = std::vector<double>;

struct SynthConfig {
  int samples_per_frame = 150;        // N
  int estimates_per_location = 1000;  // E
  double noise_floor = 0.0;           // watts added to the true RSS

  void validate() const;
};

/// Chi-squared draw with `dof` degrees of freedom (Gamma(dof/2, 2)).
double chi2_sample(int dof, Rng& rng);

/// Finite-sample RSS estimate: each component is true_rss[i] * c / (2N) with
/// c ~ chi2(2N), i.e. the sample mean of N unit-variance complex Gaussian
/// powers scaled by the true RSS.
RssVector synth_estimate(std::span<const double> true_rss, int n_samples, Rng& rng);

/// As above with the configured noise floor added to the true RSS first.
RssVector synth_estimate(std::span<const double> true_rss, const SynthConfig& config, Rng& rng);

/// (1/N) sum |s_n|^2.
double estimate_rss_from_samples(std::span<const std::complex<double>> samples);

/// E pre-synthesized estimates for each location of one split, as in a
/// survey that stores repeated measurements per location.
class EstimateBank {
 public:
  EstimateBank(const FingerprintDataset& ds, Split split, const SynthConfig& config, Rng& rng);

  std::size_t num_locations() const { return location_index_.size(); }
  std::size_t estimates_per_location() const { return per_location_; }
  /// Dataset index of the bank's `slot`-th location.
  std::size_t location_index(std::size_t slot) const { return location_index_[slot]; }
  std::span<const double> estimate(std::size_t slot, std::size_t e) const;

 private:
  std::vector<std::size_t> location_index_;
  std::size_t per_location_;
  std::size_t num_aps_;
  std::vector<double> values_;
};

}  // namespace phyguard
