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

#include "phyguard/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include "phyguard/error.hpp"
#include "phyguard/graph.hpp"

namespace phyguard {
namespace {

constexpr double kZ95 = 1.959963984540054;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (trials_per_hypothesis < kMinCalibrationTrials) {
    throw ConfigError("trials_per_hypothesis must be at least " + std::to_string(kMinCalibrationTrials));
  }
  if (holdout_trials == 0) throw ConfigError("holdout_trials must be positive");
  if (!(frame_rate > 0.0)) throw ConfigError("frame_rate must be positive");
  if (num_frames < 2) throw ConfigError("num_frames must be at least 2");
  if (samples_per_frame < 1) throw ConfigError("samples_per_frame must be positive");
  if (!(speed >= 0.0)) throw ConfigError("speed must be non-negative");
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) throw ConfigError("target_pfa must be in (0, 1)");
  if (speed_grid.empty() || frames_grid.empty() || samples_grid.empty()) throw ConfigError("grids must be nonempty");
  for (double v : speed_grid) {
    if (!(v >= 0.0)) throw ConfigError("speed grid values must be non-negative");
  }
  for (std::size_t k : frames_grid) {
    if (k < 2) throw ConfigError("frame grid values must be at least 2");
  }
  for (int n : samples_grid) {
    if (n < 1) throw ConfigError("sample grid values must be positive");
  }
}

ScenarioConfig ExperimentConfig::scenario() const {
  ScenarioConfig s;
  s.num_frames = num_frames;
  s.frame_rate = frame_rate;
  s.speed = speed;
  return s;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"trials_per_hypothesis", c.trials_per_hypothesis},
          {"holdout_trials", c.holdout_trials},
          {"frame_rate", c.frame_rate},
          {"num_frames", c.num_frames},
          {"samples_per_frame", c.samples_per_frame},
          {"speed", c.speed},
          {"target_pfa", c.target_pfa},
          {"speed_grid", c.speed_grid},
          {"frames_grid", c.frames_grid},
          {"samples_grid", c.samples_grid},
          {"seed", c.seed}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.trials_per_hypothesis = j.value("trials_per_hypothesis", c.trials_per_hypothesis);
    c.holdout_trials = j.value("holdout_trials", c.holdout_trials);
    c.frame_rate = j.value("frame_rate", c.frame_rate);
    c.num_frames = j.value("num_frames", c.num_frames);
    c.samples_per_frame = j.value("samples_per_frame", c.samples_per_frame);
    c.speed = j.value("speed", c.speed);
    c.target_pfa = j.value("target_pfa", c.target_pfa);
    c.speed_grid = j.value("speed_grid", c.speed_grid);
    c.frames_grid = j.value("frames_grid", c.frames_grid);
    c.samples_grid = j.value("samples_grid", c.samples_grid);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

RocCurve roc_from_scores(std::span<const double> h0, std::span<const double> h1) {
  require(!h0.empty() && !h1.empty(), "ROC needs scores under both hypotheses");
  for (double v : h0) require(!std::isnan(v), "NaN statistic");
  for (double v : h1) require(!std::isnan(v), "NaN statistic");

  std::vector<double> a(h0.begin(), h0.end());
  std::vector<double> b(h1.begin(), h1.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::set<double> taus(a.begin(), a.end());
  taus.insert(b.begin(), b.end());

  auto above = [](const std::vector<double>& sorted, double tau) {
    return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), tau)) /
           static_cast<double>(sorted.size());
  };
  RocCurve curve;
  curve.points.push_back({1.0, 1.0});
  for (double tau : taus) curve.points.push_back({above(a, tau), above(b, tau)});
  std::sort(curve.points.begin(), curve.points.end(),
            [](const RocPoint& x, const RocPoint& y) { return x.pfa != y.pfa ? x.pfa < y.pfa : x.pd < y.pd; });
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i - 1];
    const auto& q = curve.points[i];
    curve.auc += (q.pfa - p.pfa) * 0.5 * (p.pd + q.pd);
  }
  return curve;
}

double pd_at_pfa(const RocCurve& curve, double target_pfa) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.pfa <= target_pfa) best = std::max(best, p.pd);
  }
  return best;
}

double threshold_for_pfa(std::span<const double> h0, double target_pfa) {
  require(!h0.empty(), "threshold selection needs H0 scores");
  require(target_pfa > 0.0 && target_pfa < 1.0, "target_pfa must be in (0, 1)");
  std::vector<double> sorted(h0.begin(), h0.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  for (double tau : sorted) {
    const auto above = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), tau));
    if (above <= target_pfa * n) return tau;
  }
  return sorted.back();
}

double exceed_fraction(std::span<const double> values, double tau) {
  if (values.empty()) return 0.0;
  const auto n = std::count_if(values.begin(), values.end(), [tau](double v) { return v > tau; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

Interval binomial_ci(std::size_t successes, std::size_t trials) {
  require(trials > 0 && successes <= trials, "binomial interval needs 0 <= successes <= trials > 0");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

double binomial_margin(double p, std::size_t trials) {
  require(trials > 0, "binomial margin needs trials > 0");
  return kZ95 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "spearman needs two equal-length samples of size >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t SeedLedger::derive(const std::string& stream, std::uint64_t index) {
  const std::uint64_t seed = derive_seed(master_, stream, index);
  seeds_[stream + "/" + std::to_string(index)] = seed;
  return seed;
}

bool SeedLedger::disjoint() const {
  std::set<std::uint64_t> seen;
  for (const auto& [name, seed] : seeds_) {
    if (!seen.insert(seed).second) return false;
  }
  return true;
}

nlohmann::json SeedLedger::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, seed] : seeds_) j[name] = seed;
  return j;
}

std::uint64_t trial_seed(std::uint64_t batch_seed, std::size_t i) { return derive_seed(batch_seed, "trial", i); }

std::vector<std::string> DetectorSuite::names() const {
  std::vector<std::string> out{"gsd"};
  for (const auto& b : baselines) out.emplace_back(to_string(b.algorithm));
  return out;
}

std::vector<ClusterDetector> default_baselines() {
  std::vector<ClusterDetector> out(3);
  out[0].algorithm = ClusterAlgorithm::dbscan;
  out[1].algorithm = ClusterAlgorithm::optics;
  out[2].algorithm = ClusterAlgorithm::birch;
  return out;
}

std::vector<double> detector_statistics(const DetectorSuite& suite, const FrameSequence& seq) {
  std::vector<double> out;
  out.reserve(suite.size());
  out.push_back(gnn_forward(suite.gnn, build_graph(seq, suite.pcd)));
  for (const auto& b : suite.baselines) out.push_back(static_cast<double>(cluster_count(b, seq)));
  return out;
}

ScoreTable run_trials(const FingerprintDataset& ds, const DetectorSuite& suite, ScenarioConfig scenario,
                      const SynthConfig& synth, Hypothesis h, std::uint64_t batch_seed, std::size_t count,
                      std::size_t workers) {
  scenario.hypothesis = h;
  ScoreTable scores(suite.size(), std::vector<double>(count));
  parallel_for(count, workers, [&](std::size_t i) {
    ScenarioConfig trial = scenario;
    trial.seed = trial_seed(batch_seed, i);
    const auto stats = detector_statistics(suite, gen_sequence(ds, Split::test, trial, synth));
    for (std::size_t d = 0; d < stats.size(); ++d) scores[d][i] = stats[d];
  });
  return scores;
}

double calibrate_detector(std::size_t d, std::span<const double> h0_scores, double target_pfa) {
  if (d == 0) return threshold_for_pfa(h0_scores, target_pfa);
  std::vector<std::size_t> counts;
  counts.reserve(h0_scores.size());
  for (double v : h0_scores) counts.push_back(static_cast<std::size_t>(v));
  return calibrate_threshold(counts, target_pfa);
}

RocResult run_roc(const FingerprintDataset& ds, const DetectorSuite& suite, const ExperimentConfig& cfg,
                  const SynthConfig& synth, SeedLedger& seeds, std::size_t workers) {
  cfg.validate();
  SynthConfig s = synth;
  s.samples_per_frame = cfg.samples_per_frame;
  const auto scenario = cfg.scenario();

  RocResult r;
  r.detectors = suite.names();
  r.h0 = run_trials(ds, suite, scenario, s, Hypothesis::h0, seeds.derive("eval-h0"), cfg.trials_per_hypothesis,
                    workers);
  r.h1 = run_trials(ds, suite, scenario, s, Hypothesis::h1, seeds.derive("eval-h1"), cfg.trials_per_hypothesis,
                    workers);
  r.holdout = run_trials(ds, suite, scenario, s, Hypothesis::h0, seeds.derive("eval-h0-holdout"),
                         cfg.holdout_trials, workers);
  for (std::size_t d = 0; d < suite.size(); ++d) {
    r.curves.push_back(roc_from_scores(r.h0[d], r.h1[d]));
    const double tau = calibrate_detector(d, r.h0[d], cfg.target_pfa);
    r.thresholds.push_back(tau);
    r.pd.push_back(exceed_fraction(r.h1[d], tau));
    r.pfa.push_back(exceed_fraction(r.h0[d], tau));
    r.holdout_pfa.push_back(exceed_fraction(r.holdout[d], tau));
  }
  return r;
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::num_frames: return "frames";
    case SweepAxis::num_samples: return "samples";
    case SweepAxis::speed: break;
  }
  return "speed";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "speed") return SweepAxis::speed;
  if (name == "frames") return SweepAxis::num_frames;
  if (name == "samples") return SweepAxis::num_samples;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

std::vector<double> axis_grid(SweepAxis axis, const ExperimentConfig& cfg) {
  switch (axis) {
    case SweepAxis::num_frames: return {cfg.frames_grid.begin(), cfg.frames_grid.end()};
    case SweepAxis::num_samples: return {cfg.samples_grid.begin(), cfg.samples_grid.end()};
    case SweepAxis::speed: break;
  }
  return cfg.speed_grid;
}

SweepResult run_pd_sweep(SweepAxis axis, const FingerprintDataset& ds, const SuiteProvider& suites,
                         const ExperimentConfig& cfg, const SynthConfig& synth, SeedLedger& seeds,
                         std::size_t workers) {
  cfg.validate();
  SweepResult result;
  result.axis = axis;
  const std::string tag = to_string(axis);
  const auto grid = axis_grid(axis, cfg);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double value = grid[p];
    ScenarioConfig scenario = cfg.scenario();
    SynthConfig s = synth;
    s.samples_per_frame = cfg.samples_per_frame;
    switch (axis) {
      case SweepAxis::speed: scenario.speed = value; break;
      case SweepAxis::num_frames: scenario.num_frames = static_cast<std::size_t>(value); break;
      case SweepAxis::num_samples: s.samples_per_frame = static_cast<int>(value); break;
    }
    const DetectorSuite& suite = suites(value);
    ScoreTable h0, h1;
    try {
      h0 = run_trials(ds, suite, scenario, s, Hypothesis::h0, seeds.derive("eval-h0-" + tag, p),
                      cfg.trials_per_hypothesis, workers);
      h1 = run_trials(ds, suite, scenario, s, Hypothesis::h1, seeds.derive("eval-h1-" + tag, p),
                      cfg.trials_per_hypothesis, workers);
    } catch (const InfeasibleScenarioError&) {
      result.skipped.push_back(value);
      continue;
    }
    const auto names = suite.names();
    for (std::size_t d = 0; d < suite.size(); ++d) {
      SweepRow row;
      row.axis_value = value;
      row.detector = names[d];
      row.threshold = calibrate_detector(d, h0[d], cfg.target_pfa);
      const auto hits = static_cast<std::size_t>(
          std::count_if(h1[d].begin(), h1[d].end(), [&](double v) { return v > row.threshold; }));
      row.pd = static_cast<double>(hits) / static_cast<double>(h1[d].size());
      row.ci = binomial_ci(hits, h1[d].size());
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "pfa,pd\n";
  for (const auto& p : curve.points) out << fmt(p.pfa) << ',' << fmt(p.pd) << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "axis,detector,pd,ci_low,ci_high\n";
  for (const auto& r : result.rows) {
    out << fmt(r.axis_value) << ',' << r.detector << ',' << fmt(r.pd) << ',' << fmt(r.ci.low) << ','
        << fmt(r.ci.high) << '\n';
  }
}

std::vector<LabeledGraph> make_graph_corpus(const FingerprintDataset& ds, Split split, const PcdModel& pcd,
                                            ScenarioConfig base, const SynthConfig& synth,
                                            std::span<const double> speeds, std::size_t count,
                                            std::uint64_t batch_seed, std::size_t workers) {
  require(!speeds.empty(), "graph corpus needs at least one speed");
  std::vector<LabeledGraph> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    Rng rng(trial_seed(batch_seed, i));
    ScenarioConfig cfg = base;
    cfg.hypothesis = i % 2 == 0 ? Hypothesis::h0 : Hypothesis::h1;
    cfg.speed = speeds[std::uniform_int_distribution<std::size_t>(0, speeds.size() - 1)(rng)];
    cfg.seed = rng();
    out[i].graph = build_graph(gen_sequence(ds, split, cfg, synth), pcd);
    out[i].label = cfg.hypothesis == Hypothesis::h1 ? 1 : 0;
  });
  return out;
}

double graph_auc(const GnnModel& model, std::span<const LabeledGraph> graphs) {
  std::vector<double> h0, h1;
  for (const auto& g : graphs) (g.label == 1 ? h1 : h0).push_back(gnn_forward(model, g.graph));
  return roc_from_scores(h0, h1).auc;
}

}  // namespace phyguard
