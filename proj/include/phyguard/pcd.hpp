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

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "phyguard/ingest.hpp"
#include "phyguard/neural.hpp"
#include "phyguard/synth.hpp"

namespace phyguard {

struct PcdArchitecture {
  std::vector<std::size_t> hidden = {512, 512, 512};
  double leaky_slope = 0.01;
  double epsilon_log = 1e-12;
};

/// Position-change detector. The statistic is the symmetrized average of an
/// asymmetric network over the log-domain pair features; a pair is declared
/// "different location" when the statistic exceeds `threshold`.
struct PcdModel {
  nn::DenseNetwork aux_net;  // 3M -> hidden... -> 1
  double threshold = 0.0;
  double epsilon_log = 1e-12;
  // Fixed standardization applied to the pair features before aux_net.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  std::size_t num_aps() const { return aux_net.input_size() / 3; }
  void validate() const;
};

/// Untrained model with identity standardization.
PcdModel make_pcd_model(std::size_t num_aps, const PcdArchitecture& arch, Rng& rng);

/// sign(d) * 10 log10(1 + |d| / eps).
double signed_log_db(double d, double eps);

/// [10log10(r + eps), 10log10(r' + eps), signed_log_db(r - r')], length 3M.
std::vector<double> featurize_pair(std::span<const double> r, std::span<const double> r_prime, double epsilon_log);

/// (g(r, r') + g(r', r)) / 2. Exactly symmetric in its arguments.
double pcd_statistic(const PcdModel& model, std::span<const double> r, std::span<const double> r_prime);

/// Statistics of many frame pairs in one batch. Bit-identical to calling
/// pcd_statistic on each pair.
std::vector<double> pcd_pair_statistics(const PcdModel& model, std::span<const RssVector> frames,
                                        std::span<const std::pair<std::size_t, std::size_t>> pairs);

using RssPair = std::pair<RssVector, RssVector>;

/// Balanced pair set; same-location pairs carry label 0, different-location
/// pairs label 1.
struct PairDataset {
  std::vector<RssPair> same_pairs;
  std::vector<RssPair> diff_pairs;

  std::size_t size() const { return same_pairs.size() + diff_pairs.size(); }
};

/// P same-location pairs (one location, two distinct stored estimates) and P
/// different-location pairs (two distinct locations) drawn uniformly from the
/// locations of `split`, over an estimate bank of E estimates per location.
PairDataset build_pair_dataset(const FingerprintDataset& ds, const SynthConfig& synth, std::size_t pairs_per_class,
                               Split split, std::uint64_t seed);

struct PcdTraining {
  PcdModel model;
  nn::FitHistory history;
};

/// Trains the auxiliary network with BCE on the symmetrized statistic used
/// as the logit. The returned model's threshold is 0.
PcdTraining train_pcd(const PairDataset& pairs, const PairDataset& val_pairs, const nn::TrainConfig& config,
                      const PcdArchitecture& arch = {});

/// Empirical (1 - target_same_fa) quantile of the statistic over
/// same-location pairs.
double calibrate_pcd_threshold(const PcdModel& model, std::span<const RssPair> same_pairs, double target_same_fa);

/// Fraction of pairs classified correctly at `threshold`.
double pair_accuracy(const PcdModel& model, const PairDataset& pairs, double threshold);

nlohmann::json to_json(const PcdModel& model);
PcdModel pcd_from_json(const nlohmann::json& j);
void save_pcd(const std::filesystem::path& path, const PcdModel& model);
PcdModel load_pcd(const std::filesystem::path& path);

}  // namespace phyguard
