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

#include "phyguard/pcd.hpp"

#include <algorithm>
#include <cmath>

#include "phyguard/error.hpp"

namespace phyguard {
namespace {

using nn::Matrix;

void check_rss(std::span<const double> r) {
  for (double w : r) {
    require(std::isfinite(w) && w > 0.0, "RSS entries must be positive and finite");
  }
}

// Standardized features of (a, b) written into column `col` of `out`.
void write_features(const PcdModel& model, std::span<const double> a, std::span<const double> b, Matrix& out,
                    Eigen::Index col) {
  const std::size_t m = a.size();
  const double eps = model.epsilon_log;
  for (std::size_t i = 0; i < m; ++i) {
    const double raw[3] = {10.0 * std::log10(a[i] + eps), 10.0 * std::log10(b[i] + eps),
                           signed_log_db(a[i] - b[i], eps)};
    for (std::size_t block = 0; block < 3; ++block) {
      const std::size_t f = block * m + i;
      out(static_cast<Eigen::Index>(f), col) = (raw[block] - model.feature_mean[f]) / model.feature_scale[f];
    }
  }
}

// Forward both orders of each pair and average.
std::vector<double> symmetrized(const PcdModel& model, const Matrix& ab, const Matrix& ba) {
  Matrix both(ab.rows(), ab.cols() + ba.cols());
  both << ab, ba;
  const Matrix g = model.aux_net.forward(both);
  std::vector<double> out(static_cast<std::size_t>(ab.cols()));
  for (Eigen::Index c = 0; c < ab.cols(); ++c) out[static_cast<std::size_t>(c)] = 0.5 * (g(0, c) + g(0, ab.cols() + c));
  return out;
}

class PcdProblem {
 public:
  PcdProblem(const PcdModel& model, const PairDataset& train, const PairDataset& val) {
    encode(model, train, train_ab_, train_ba_, train_labels_);
    encode(model, val, val_ab_, val_ba_, val_labels_);
  }

  std::size_t train_size() const { return train_labels_.size(); }

  double batch_gradient(const PcdModel& model, std::span<const std::size_t> batch, PcdModel& grad) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    Matrix x(train_ab_.rows(), 2 * n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto src = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(c)]);
      x.col(c) = train_ab_.col(src);
      x.col(n + c) = train_ba_.col(src);
    }
    const Matrix g = model.aux_net.forward(x, cache_);
    Matrix upstream(1, 2 * n);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const int label = train_labels_[batch[static_cast<std::size_t>(c)]];
      const double logit = 0.5 * (g(0, c) + g(0, n + c));
      loss += nn::bce_with_logit(logit, label);
      const double d = 0.5 * nn::bce_gradient(logit, label) / static_cast<double>(n);
      upstream(0, c) = d;
      upstream(0, n + c) = d;
    }
    model.aux_net.backward(cache_, upstream, grad.aux_net);
    return loss / static_cast<double>(n);
  }

  nn::Evaluation validate(const PcdModel& model) const {
    nn::Evaluation e;
    const Eigen::Index n = val_ab_.cols();
    constexpr Eigen::Index chunk = 4096;
    for (Eigen::Index start = 0; start < n; start += chunk) {
      const Eigen::Index count = std::min(chunk, n - start);
      const auto stats = symmetrized(model, val_ab_.middleCols(start, count), val_ba_.middleCols(start, count));
      for (Eigen::Index c = 0; c < count; ++c) {
        const int label = val_labels_[static_cast<std::size_t>(start + c)];
        const double s = stats[static_cast<std::size_t>(c)];
        e.loss += nn::bce_with_logit(s, label);
        e.accuracy += ((s > 0.0) == (label == 1)) ? 1.0 : 0.0;
      }
    }
    e.loss /= static_cast<double>(n);
    e.accuracy /= static_cast<double>(n);
    return e;
  }

 private:
  static void encode(const PcdModel& model, const PairDataset& pairs, Matrix& ab, Matrix& ba,
                     std::vector<int>& labels) {
    const auto rows = static_cast<Eigen::Index>(3 * model.num_aps());
    const auto n = static_cast<Eigen::Index>(pairs.size());
    ab.resize(rows, n);
    ba.resize(rows, n);
    labels.clear();
    Eigen::Index c = 0;
    for (int label : {0, 1}) {
      const auto& list = label == 0 ? pairs.same_pairs : pairs.diff_pairs;
      for (const auto& [a, b] : list) {
        write_features(model, a, b, ab, c);
        write_features(model, b, a, ba, c);
        labels.push_back(label);
        ++c;
      }
    }
  }

  Matrix train_ab_, train_ba_, val_ab_, val_ba_;
  std::vector<int> train_labels_, val_labels_;
  nn::ForwardCache cache_;
};

// Adapter giving PcdModel the interface nn::fit expects.
struct TrainablePcd {
  PcdModel model;

  TrainablePcd zeros_like() const {
    TrainablePcd out = *this;
    out.model.aux_net.set_zero();
    return out;
  }
  void set_zero() { model.aux_net.set_zero(); }
  std::vector<std::span<double>> parameters() { return model.aux_net.parameters(); }
};

class PcdFitProblem {
 public:
  explicit PcdFitProblem(PcdProblem& inner) : inner_(inner) {}
  std::size_t train_size() const { return inner_.train_size(); }
  double batch_gradient(const TrainablePcd& m, std::span<const std::size_t> batch, TrainablePcd& grad) {
    return inner_.batch_gradient(m.model, batch, grad.model);
  }
  nn::Evaluation validate(const TrainablePcd& m) const { return inner_.validate(m.model); }

 private:
  PcdProblem& inner_;
};

}  // namespace

void PcdModel::validate() const {
  const std::size_t width = aux_net.input_size();
  require(width > 0 && width % 3 == 0, "PCD network input width must be 3M");
  require(aux_net.output_size() == 1, "PCD network must have one output");
  require(std::isfinite(threshold), "PCD threshold must be finite");
  require(epsilon_log > 0.0 && std::isfinite(epsilon_log), "epsilon_log must be positive");
  require(feature_mean.size() == width && feature_scale.size() == width, "feature standardization size mismatch");
  for (double s : feature_scale) require(s > 0.0 && std::isfinite(s), "feature scales must be positive");
}

PcdModel make_pcd_model(std::size_t num_aps, const PcdArchitecture& arch, Rng& rng) {
  require(num_aps > 0, "PCD needs at least one access point");
  std::vector<std::size_t> widths{3 * num_aps};
  std::vector<nn::Activation> acts;
  for (auto h : arch.hidden) {
    widths.push_back(h);
    acts.push_back(nn::Activation::leaky_relu(arch.leaky_slope));
  }
  widths.push_back(1);
  acts.push_back(nn::Activation::identity());
  PcdModel model;
  model.aux_net = nn::DenseNetwork::make(widths, acts, rng);
  model.epsilon_log = arch.epsilon_log;
  model.feature_mean.assign(3 * num_aps, 0.0);
  model.feature_scale.assign(3 * num_aps, 1.0);
  return model;
}

double signed_log_db(double d, double eps) {
  if (d == 0.0) return 0.0;
  const double magnitude = 10.0 * std::log10(1.0 + std::abs(d) / eps);
  return d > 0.0 ? magnitude : -magnitude;
}

std::vector<double> featurize_pair(std::span<const double> r, std::span<const double> r_prime, double epsilon_log) {
  require(r.size() == r_prime.size() && !r.empty(), "RSS vectors must have equal nonzero length");
  require(epsilon_log > 0.0, "epsilon_log must be positive");
  check_rss(r);
  check_rss(r_prime);
  const std::size_t m = r.size();
  std::vector<double> out(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = 10.0 * std::log10(r[i] + epsilon_log);
    out[m + i] = 10.0 * std::log10(r_prime[i] + epsilon_log);
    out[2 * m + i] = signed_log_db(r[i] - r_prime[i], epsilon_log);
  }
  return out;
}

std::vector<double> pcd_pair_statistics(const PcdModel& model, std::span<const RssVector> frames,
                                        std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  const std::size_t m = model.num_aps();
  for (const auto& f : frames) {
    require(f.size() == m, "frame has " + std::to_string(f.size()) + " receivers, model expects " +
                               std::to_string(m));
    check_rss(f);
  }
  const auto rows = static_cast<Eigen::Index>(3 * m);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Matrix ab(rows, n), ba(rows, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto [i, j] = pairs[static_cast<std::size_t>(c)];
    require(i < frames.size() && j < frames.size(), "pair index out of range");
    write_features(model, frames[i], frames[j], ab, c);
    write_features(model, frames[j], frames[i], ba, c);
  }
  return symmetrized(model, ab, ba);
}

double pcd_statistic(const PcdModel& model, std::span<const double> r, std::span<const double> r_prime) {
  const RssVector frames[2] = {RssVector(r.begin(), r.end()), RssVector(r_prime.begin(), r_prime.end())};
  const std::pair<std::size_t, std::size_t> pair{0, 1};
  return pcd_pair_statistics(model, frames, std::span(&pair, 1)).front();
}

PairDataset build_pair_dataset(const FingerprintDataset& ds, const SynthConfig& synth, std::size_t pairs_per_class,
                               Split split, std::uint64_t seed) {
  if (pairs_per_class == 0) throw ConfigError("number of pairs per class must be positive");
  synth.validate();
  if (synth.estimates_per_location < 2) throw ConfigError("need at least two estimates per location");
  const auto count = ds.indices(split).size();
  if (count < 2) {
    throw InsufficientDataError(std::string("split '") + to_string(split) +
                                "' needs at least two locations for different-location pairs");
  }
  Rng bank_rng = make_rng(seed, "bank");
  const EstimateBank bank(ds, split, synth, bank_rng);
  Rng rng = make_rng(seed, "pairs");
  std::uniform_int_distribution<std::size_t> pick_loc(0, bank.num_locations() - 1);
  std::uniform_int_distribution<std::size_t> pick_est(0, bank.estimates_per_location() - 1);

  auto estimate = [&](std::size_t slot, std::size_t e) {
    auto s = bank.estimate(slot, e);
    return RssVector(s.begin(), s.end());
  };
  // Two distinct values from [0, n) (n >= 2).
  auto distinct_pair = [&](std::uniform_int_distribution<std::size_t>& dist) {
    const std::size_t a = dist(rng);
    std::size_t b = dist(rng);
    while (b == a) b = dist(rng);
    return std::pair{a, b};
  };

  PairDataset out;
  out.same_pairs.reserve(pairs_per_class);
  out.diff_pairs.reserve(pairs_per_class);
  for (std::size_t p = 0; p < pairs_per_class; ++p) {
    const std::size_t d = pick_loc(rng);
    const auto [e1, e2] = distinct_pair(pick_est);
    out.same_pairs.emplace_back(estimate(d, e1), estimate(d, e2));
  }
  for (std::size_t p = 0; p < pairs_per_class; ++p) {
    const auto [d1, d2] = distinct_pair(pick_loc);
    const auto [e1, e2] = distinct_pair(pick_est);
    out.diff_pairs.emplace_back(estimate(d1, e1), estimate(d2, e2));
  }
  return out;
}

PcdTraining train_pcd(const PairDataset& pairs, const PairDataset& val_pairs, const nn::TrainConfig& config,
                      const PcdArchitecture& arch) {
  if (pairs.same_pairs.empty() || pairs.diff_pairs.empty()) {
    throw ConfigError("PCD training needs both same-location and different-location pairs");
  }
  if (val_pairs.size() == 0) throw ConfigError("PCD validation set is empty");
  const std::size_t m = pairs.same_pairs.front().first.size();

  Rng init = make_rng(config.seed, "pcd-init");
  TrainablePcd trainable{make_pcd_model(m, arch, init)};
  PcdModel& model = trainable.model;

  // Standardize each raw feature with its training mean and spread, taken
  // over both pair orders.
  const std::size_t width = 3 * m;
  std::vector<double> sum(width, 0.0), sum_sq(width, 0.0);
  std::size_t n = 0;
  for (const auto* list : {&pairs.same_pairs, &pairs.diff_pairs}) {
    for (const auto& [a, b] : *list) {
      require(a.size() == m && b.size() == m, "pair vectors must all have the same length");
      for (const auto& f : {featurize_pair(a, b, model.epsilon_log), featurize_pair(b, a, model.epsilon_log)}) {
        for (std::size_t i = 0; i < width; ++i) {
          sum[i] += f[i];
          sum_sq[i] += f[i] * f[i];
        }
        ++n;
      }
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    const double mean = sum[i] / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq[i] / static_cast<double>(n) - mean * mean);
    model.feature_mean[i] = mean;
    model.feature_scale[i] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  PcdProblem problem(model, pairs, val_pairs);
  PcdFitProblem adapter(problem);
  PcdTraining out;
  out.history = nn::fit(trainable, adapter, config);
  out.model = std::move(trainable.model);
  out.model.threshold = 0.0;
  return out;
}

double calibrate_pcd_threshold(const PcdModel& model, std::span<const RssPair> same_pairs, double target_same_fa) {
  if (same_pairs.empty()) throw InsufficientDataError("no same-location pairs to calibrate on");
  if (!(target_same_fa > 0.0 && target_same_fa < 1.0)) throw ConfigError("target_same_fa must be in (0, 1)");
  std::vector<RssVector> frames;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  frames.reserve(2 * same_pairs.size());
  for (const auto& [a, b] : same_pairs) {
    index.emplace_back(frames.size(), frames.size() + 1);
    frames.push_back(a);
    frames.push_back(b);
  }
  auto stats = pcd_pair_statistics(model, frames, index);
  std::sort(stats.begin(), stats.end());
  // Smallest order statistic with at least (1 - target) of the mass at or
  // below it.
  const double n = static_cast<double>(stats.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - target_same_fa) * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, stats.size());
  return stats[k - 1];
}

double pair_accuracy(const PcdModel& model, const PairDataset& pairs, double threshold) {
  require(pairs.size() > 0, "empty pair set");
  std::vector<RssVector> frames;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  std::vector<int> labels;
  for (int label : {0, 1}) {
    for (const auto& [a, b] : label == 0 ? pairs.same_pairs : pairs.diff_pairs) {
      index.emplace_back(frames.size(), frames.size() + 1);
      frames.push_back(a);
      frames.push_back(b);
      labels.push_back(label);
    }
  }
  const auto stats = pcd_pair_statistics(model, frames, index);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < stats.size(); ++i) correct += ((stats[i] > threshold) == (labels[i] == 1)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(stats.size());
}

nlohmann::json to_json(const PcdModel& model) {
  return {{"format_version", nn::kModelFormatVersion},
          {"kind", "pcd"},
          {"num_aps", model.num_aps()},
          {"threshold", model.threshold},
          {"epsilon_log", model.epsilon_log},
          {"feature_mean", model.feature_mean},
          {"feature_scale", model.feature_scale},
          {"network", nn::to_json(model.aux_net)}};
}

PcdModel pcd_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != nn::kModelFormatVersion || j.at("kind").get<std::string>() != "pcd") {
    throw ConfigError("not a version-" + std::to_string(nn::kModelFormatVersion) + " PCD model");
  }
  PcdModel model;
  model.aux_net = nn::network_from_json(j.at("network"));
  model.threshold = j.at("threshold").get<double>();
  model.epsilon_log = j.at("epsilon_log").get<double>();
  model.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  model.feature_scale = j.at("feature_scale").get<std::vector<double>>();
  if (j.at("num_aps").get<std::size_t>() != model.num_aps()) throw ConfigError("PCD num_aps disagrees with network");
  model.validate();
  return model;
}

void save_pcd(const std::filesystem::path& path, const PcdModel& model) { nn::save_json(path, to_json(model)); }

PcdModel load_pcd(const std::filesystem::path& path) { return pcd_from_json(nn::load_json(path)); }

}  // namespace phyguard
