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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "phyguard/baselines.hpp"
#include "phyguard/evaluation.hpp"
#include "phyguard/gnn.hpp"
#include "phyguard/ingest.hpp"
#include "phyguard/neural.hpp"
#include "phyguard/pcd.hpp"
#include "phyguard/synth.hpp"

namespace phyguard::app {

/// Everything a run needs, read from one JSON file with per-command sections.
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: all cores

  IngestConfig ingest;
  double test_frac = 0.2;
  double val_frac = 0.1;

  SynthConfig synth;

  std::size_t pcd_pairs_per_class = 50000;
  std::size_t pcd_val_pairs_per_class = 5000;
  double pcd_target_same_fa = 0.05;
  PcdArchitecture pcd_arch;
  nn::TrainConfig pcd_train;

  std::size_t gnn_train_graphs = 2000;
  std::size_t gnn_val_graphs = 500;
  std::size_t gnn_width = GnnModel::kDefaultWidth;
  std::size_t gnn_layers = GnnModel::kDefaultLayers;
  nn::TrainConfig gnn_train;

  std::vector<ClusterDetector> baselines = default_baselines();
  ExperimentConfig experiment;

  /// Throws ConfigError naming the offending field or path.
  void validate() const;
};

/// Reads the JSON file and applies `--section.key=value` overrides. Values
/// are parsed as JSON when possible and taken as strings otherwise.
nlohmann::json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides);
void apply_override(nlohmann::json& config, const std::string& flag);

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

/// Files written under the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path split_csv() const { return root / "split.csv"; }
  std::filesystem::path pcd_model() const { return root / "pcd.json"; }
  std::filesystem::path gnn_model() const { return root / "gnn.json"; }
  std::filesystem::path pcd_model(int samples) const;
  std::filesystem::path gnn_model(int samples) const;
  std::filesystem::path manifest(const std::string& name) const { return root / ("manifest_" + name + ".json"); }
};

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Loads the dataset and assigns the seeded split.
FingerprintDataset prepare_dataset(const RunConfig& cfg);

/// Reads a `location_id,split` file back onto a freshly loaded dataset.
void apply_split_csv(std::istream& in, FingerprintDataset& ds);

struct PcdStage {
  PcdModel model;
  nn::FitHistory history;
  double val_accuracy = 0.0;  // at threshold 0
};

/// Trains on train-split pairs, validates on val-split pairs and calibrates
/// the edge threshold on the validation same-location pairs.
PcdStage run_pcd_stage(const RunConfig& cfg, const FingerprintDataset& ds, int samples_per_frame,
                       SeedLedger& seeds);

struct GnnStage {
  GnnModel model;
  nn::FitHistory history;
  double val_auc = 0.0;
};

/// Builds the graph corpus with `pcd` and trains the GNN.
GnnStage run_gnn_stage(const RunConfig& cfg, const FingerprintDataset& ds, const PcdModel& pcd,
                       int samples_per_frame, SeedLedger& seeds);

/// Validation accuracy the PCD must reach.
inline constexpr double kPcdAccuracyGate = 0.90;

/// CLI entry point; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitNumerical = 4;
inline constexpr int kExitOther = 1;

}  // namespace phyguard::app
