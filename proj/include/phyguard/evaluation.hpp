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
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "phyguard/baselines.hpp"
#include "phyguard/gnn.hpp"
#include "phyguard/pcd.hpp"
#include "phyguard/trajectory.hpp"

namespace phyguard {

struct ExperimentConfig {
  std::size_t trials_per_hypothesis = 500;
  std::size_t holdout_trials = 500;  // fresh H0 trials for the achieved-Pfa check
  double frame_rate = 10.0;
  std::size_t num_frames = 30;
  int samples_per_frame = 150;
  double speed = 1.0;
  double target_pfa = 0.1;
  std::vector<double> speed_grid = {0.0, 0.5, 1.0, 2.0, 3.0, 5.0};
  std::vector<std::size_t> frames_grid = {5, 10, 20, 30, 40, 50};
  std::vector<int> samples_grid = {25, 50, 100, 150, 250};
  std::uint64_t seed = 1;

  void validate() const;
  ScenarioConfig scenario() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// --- detection-theory helpers -------------------------------------------

struct RocPoint {
  double pfa = 0.0;
  double pd = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by (pfa, pd)
  double auc = 0.0;
};

/// Empirical ROC of the rule "H1 iff statistic > tau", with tau swept over
/// every observed value plus -inf. AUC by the trapezoidal rule.
RocCurve roc_from_scores(std::span<const double> h0, std::span<const double> h1);

/// Largest pd among ROC points with pfa <= target.
double pd_at_pfa(const RocCurve& curve, double target_pfa);

/// Smallest observed H0 value tau with #{h0 > tau} / n <= target_pfa.
double threshold_for_pfa(std::span<const double> h0, double target_pfa);

/// Fraction of values strictly above tau.
double exceed_fraction(std::span<const double> values, double tau);

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval at 95%.
Interval binomial_ci(std::size_t successes, std::size_t trials);

/// 1.96 * sqrt(p (1 - p) / n).
double binomial_margin(double p, std::size_t trials);

/// Rank correlation with average ranks for ties; NaN when either side is
/// constant.
double spearman(std::span<const double> x, std::span<const double> y);

// --- trial machinery ----------------------------------------------------

/// Runs fn(0..count-1) on up to `workers` threads (0 = hardware
/// concurrency). The first exception thrown is rethrown after joining.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Records every derived stream seed so that overlaps can be detected.
class SeedLedger {
 public:
  explicit SeedLedger(std::uint64_t master) : master_(master) {}
  std::uint64_t master() const { return master_; }
  /// derive_seed(master, stream, index), remembered under "stream/index".
  std::uint64_t derive(const std::string& stream, std::uint64_t index = 0);
  /// True when no two recorded streams share a seed.
  bool disjoint() const;
  nlohmann::json to_json() const;

 private:
  std::uint64_t master_;
  std::map<std::string, std::uint64_t> seeds_;
};

/// Seed of the i-th trial of a trial batch.
std::uint64_t trial_seed(std::uint64_t batch_seed, std::size_t i);

/// The graph-based detector followed by the clustering baselines.
struct DetectorSuite {
  PcdModel pcd;
  GnnModel gnn;
  std::vector<ClusterDetector> baselines;

  std::vector<std::string> names() const;
  std::size_t size() const { return 1 + baselines.size(); }
};

/// Default dbscan, optics and birch detectors.
std::vector<ClusterDetector> default_baselines();

/// GSD statistic followed by every baseline's cluster count.
std::vector<double> detector_statistics(const DetectorSuite& suite, const FrameSequence& seq);

/// scores[detector][trial]
using ScoreTable = std::vector<std::vector<double>>;

/// `count` sequences of one hypothesis on the test split; trial i uses
/// trial_seed(batch_seed, i).
ScoreTable run_trials(const FingerprintDataset& ds, const DetectorSuite& suite, ScenarioConfig scenario,
                      const SynthConfig& synth, Hypothesis h, std::uint64_t batch_seed, std::size_t count,
                      std::size_t workers);

struct RocResult {
  std::vector<std::string> detectors;
  std::vector<RocCurve> curves;
  std::vector<double> thresholds;    // GSD: real; baselines: integer
  std::vector<double> pd;            // at the calibrated threshold
  std::vector<double> pfa;           // achieved on the calibration H0 trials
  std::vector<double> holdout_pfa;   // achieved on fresh H0 trials
  ScoreTable h0;
  ScoreTable h1;
  ScoreTable holdout;
};

/// Calibrated operating threshold of detector `d` (index 0 = GSD).
double calibrate_detector(std::size_t d, std::span<const double> h0_scores, double target_pfa);

RocResult run_roc(const FingerprintDataset& ds, const DetectorSuite& suite, const ExperimentConfig& cfg,
                  const SynthConfig& synth, SeedLedger& seeds, std::size_t workers);

enum class SweepAxis { speed, num_frames, num_samples };
const char* to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepRow {
  double axis_value = 0.0;
  std::string detector;
  double threshold = 0.0;
  double pd = 0.0;
  Interval ci;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::speed;
  std::vector<SweepRow> rows;
  std::vector<double> skipped;  // infeasible axis values
};

/// Detector suite to use at one axis value.
using SuiteProvider = std::function<const DetectorSuite&(double axis_value)>;

/// Per axis value: thresholds calibrated on fresh H0 trials, Pd on fresh H1
/// trials. Infeasible points are skipped and reported.
SweepResult run_pd_sweep(SweepAxis axis, const FingerprintDataset& ds, const SuiteProvider& suites,
                         const ExperimentConfig& cfg, const SynthConfig& synth, SeedLedger& seeds,
                         std::size_t workers);

/// Axis values of the configured grid.
std::vector<double> axis_grid(SweepAxis axis, const ExperimentConfig& cfg);

/// `pfa,pd`
void write_roc_csv(std::ostream& out, const RocCurve& curve);
/// `axis,detector,pd,ci_low,ci_high`
void write_sweep_csv(std::ostream& out, const SweepResult& result);

// --- GNN training corpus ------------------------------------------------

/// Balanced labeled graphs (even index H0, odd H1) from one split; each
/// graph's speed is drawn uniformly from `speeds`.
std::vector<LabeledGraph> make_graph_corpus(const FingerprintDataset& ds, Split split, const PcdModel& pcd,
                                            ScenarioConfig base, const SynthConfig& synth,
                                            std::span<const double> speeds, std::size_t count,
                                            std::uint64_t batch_seed, std::size_t workers);

/// AUC of the GNN statistic over labeled graphs.
double graph_auc(const GnnModel& model, std::span<const LabeledGraph> graphs);

}  // namespace phyguard
