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

#include "phyguard/app.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "phyguard/error.hpp"
#include "phyguard/graph.hpp"
#include "phyguard/survey.hpp"

namespace phyguard::app {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

const json& section(const json& j, const std::string& name) {
  static const json empty = json::object();
  if (!j.contains(name)) return empty;
  return j.at(name);
}

nn::TrainConfig train_config_from(const json& j, nn::TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  return c;
}

json train_config_json(const nn::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream s;
  fn(s);
  write_text(path, s.str());
}

std::string format_fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

/// Dataset with the split recorded by `ingest`.
FingerprintDataset load_ingested(const RunConfig& cfg) {
  const Layout layout{cfg.output_dir};
  if (!fs::exists(layout.split_csv())) {
    throw MissingPrerequisiteError("split file " + layout.split_csv().string() +
                                   " not found; run `phyguard ingest` with this config first");
  }
  auto ds = load_fingerprints(cfg.dataset, cfg.ingest);
  std::ifstream in(layout.split_csv());
  apply_split_csv(in, ds);
  return ds;
}

PcdModel require_pcd(const fs::path& path) {
  if (!fs::exists(path)) {
    throw MissingPrerequisiteError("PCD model " + path.string() + " not found; run `phyguard train pcd` first");
  }
  return load_pcd(path);
}

GnnModel require_gnn(const fs::path& path) {
  if (!fs::exists(path)) {
    throw MissingPrerequisiteError("GNN model " + path.string() + " not found; run `phyguard train gnn` first");
  }
  return load_gnn(path);
}

struct Manifest {
  std::string command;
  json config;
  json seeds = json::object();
  json models = json::object();
  json outputs = json::object();
  json results = json::object();

  void model(const std::string& name, const fs::path& path) { models[name] = {{"path", path.filename().string()}, {"sha256", sha256_file(path)}}; }
  void output(const fs::path& path) { outputs[path.filename().string()] = sha256_file(path); }

  void write(const fs::path& path) const {
    const json j = {{"format_version", 1}, {"command", command}, {"config", config},     {"master_seed", config.at("seed")},
                    {"seeds", seeds},      {"models", models},   {"outputs", outputs}, {"results", results}};
    write_text(path, j.dump(2) + "\n");
  }
};

void print_history_summary(std::ostream& out, const std::string& what, const nn::FitHistory& h) {
  out << what << ": " << h.epochs.size() << " epochs, best epoch " << h.best_epoch << ", best validation loss "
      << format_fixed(h.best_val_loss, 6) << ", best validation accuracy " << format_fixed(h.best_val_accuracy, 4)
      << "\n";
}

// --- commands -------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  std::ifstream in(cfg.dataset);
  if (!in) throw ConfigError("cannot open dataset " + cfg.dataset.string());
  const auto rows = parse_observations(in);
  auto ds = split_locations(build_dataset(rows, cfg.ingest), cfg.test_frac, cfg.val_frac,
                            derive_seed(cfg.seed, "ingest/split"));

  std::map<int, std::set<int>> heard_at;
  for (const auto& r : rows) {
    if (r.floor == cfg.ingest.floor) heard_at[r.ap_id].insert(r.location_id);
  }
  json coverage = json::object();
  for (int ap : ds.selected_aps()) coverage[std::to_string(ap)] = heard_at[ap].size();

  const Layout layout{cfg.output_dir};
  fs::create_directories(layout.root);
  write_with(layout.split_csv(), [&](std::ostream& s) { write_split_csv(s, ds); });
  const json summary = {{"locations", ds.size()},
                        {"floor", cfg.ingest.floor},
                        {"selected_aps", ds.selected_aps()},
                        {"ap_coverage", coverage},
                        {"train", ds.indices(Split::train).size()},
                        {"val", ds.indices(Split::val).size()},
                        {"test", ds.indices(Split::test).size()}};
  write_text(layout.root / "ingest_summary.json", summary.dump(2) + "\n");

  out << "locations: " << ds.size() << " (floor " << cfg.ingest.floor << ")\n";
  out << "split: train " << summary["train"] << ", val " << summary["val"] << ", test " << summary["test"] << "\n";
  out << "selected access points (locations heard):";
  for (int ap : ds.selected_aps()) out << ' ' << ap << " (" << heard_at[ap].size() << ")";
  out << "\n";

  Manifest m{"ingest", to_json(cfg)};
  m.seeds["ingest/split"] = derive_seed(cfg.seed, "ingest/split");
  m.output(layout.split_csv());
  m.output(layout.root / "ingest_summary.json");
  m.results = summary;
  m.write(layout.manifest("ingest"));
  return kExitOk;
}

void save_pcd_stage(const Layout& layout, const fs::path& model_path, const PcdStage& stage) {
  save_pcd(model_path, stage.model);
  write_with(layout.root / (model_path.stem().string() + "_history.csv"),
             [&](std::ostream& s) { nn::write_history_csv(s, stage.history); });
}

void save_gnn_stage(const Layout& layout, const fs::path& model_path, const GnnStage& stage) {
  save_gnn(model_path, stage.model);
  write_with(layout.root / (model_path.stem().string() + "_history.csv"),
             [&](std::ostream& s) { nn::write_history_csv(s, stage.history); });
}

int cmd_train_pcd(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_ingested(cfg);
  SeedLedger seeds(cfg.seed);
  const auto stage = run_pcd_stage(cfg, ds, cfg.synth.samples_per_frame, seeds);
  const Layout layout{cfg.output_dir};
  save_pcd_stage(layout, layout.pcd_model(), stage);

  const bool gate = stage.val_accuracy >= kPcdAccuracyGate;
  print_history_summary(out, "pcd training", stage.history);
  out << "validation accuracy at threshold 0: " << format_fixed(stage.val_accuracy, 4) << " (gate >= "
      << format_fixed(kPcdAccuracyGate, 2) << ": " << (gate ? "PASS" : "FAIL") << ")\n";
  out << "edge threshold: " << stage.model.threshold << "\n";

  Manifest m{"train pcd", to_json(cfg)};
  m.seeds = seeds.to_json();
  m.model("pcd", layout.pcd_model());
  m.output(layout.root / "pcd_history.csv");
  m.results = {{"best_epoch", stage.history.best_epoch},
               {"best_val_loss", stage.history.best_val_loss},
               {"val_accuracy", stage.val_accuracy},
               {"accuracy_gate", gate},
               {"threshold", stage.model.threshold}};
  m.write(layout.manifest("train_pcd"));
  return kExitOk;
}

int cmd_train_gnn(const RunConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.output_dir};
  const auto pcd = require_pcd(layout.pcd_model());
  const auto ds = load_ingested(cfg);
  SeedLedger seeds(cfg.seed);
  const auto stage = run_gnn_stage(cfg, ds, pcd, cfg.synth.samples_per_frame, seeds);
  save_gnn_stage(layout, layout.gnn_model(), stage);

  print_history_summary(out, "gnn training", stage.history);
  out << "validation AUC: " << format_fixed(stage.val_auc, 4) << "\n";

  Manifest m{"train gnn", to_json(cfg)};
  m.seeds = seeds.to_json();
  m.model("pcd", layout.pcd_model());
  m.model("gnn", layout.gnn_model());
  m.output(layout.root / "gnn_history.csv");
  m.results = {{"best_epoch", stage.history.best_epoch},
               {"best_val_loss", stage.history.best_val_loss},
               {"best_val_accuracy", stage.history.best_val_accuracy},
               {"val_auc", stage.val_auc}};
  m.write(layout.manifest("train_gnn"));
  return kExitOk;
}

DetectorSuite load_suite(const RunConfig& cfg, const fs::path& pcd_path, const fs::path& gnn_path) {
  DetectorSuite suite;
  suite.pcd = require_pcd(pcd_path);
  suite.gnn = require_gnn(gnn_path);
  suite.baselines = cfg.baselines;
  return suite;
}

int cmd_evaluate_roc(const RunConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.output_dir};
  const auto suite = load_suite(cfg, layout.pcd_model(), layout.gnn_model());
  const auto ds = load_ingested(cfg);
  SeedLedger seeds(cfg.seed);
  const auto r = run_roc(ds, suite, cfg.experiment, cfg.synth, seeds, cfg.workers);

  Manifest m{"evaluate roc", to_json(cfg)};
  m.model("pcd", layout.pcd_model());
  m.model("gnn", layout.gnn_model());
  const double bound = cfg.experiment.target_pfa + binomial_margin(cfg.experiment.target_pfa, r.holdout.front().size());
  std::ostringstream calib;
  calib << "detector,threshold,auc,pd,pfa,holdout_pfa,holdout_pfa_bound\n";
  json results = json::object();
  for (std::size_t d = 0; d < r.detectors.size(); ++d) {
    const auto path = layout.root / ("roc_" + r.detectors[d] + ".csv");
    write_with(path, [&](std::ostream& s) { write_roc_csv(s, r.curves[d]); });
    m.output(path);
    calib << r.detectors[d] << ',' << r.thresholds[d] << ',' << r.curves[d].auc << ',' << r.pd[d] << ','
          << r.pfa[d] << ',' << r.holdout_pfa[d] << ',' << bound << '\n';
    out << std::left << std::setw(7) << r.detectors[d] << " AUC " << format_fixed(r.curves[d].auc, 4) << "  Pd "
        << format_fixed(r.pd[d], 4) << " at threshold " << r.thresholds[d] << "  Pfa "
        << format_fixed(r.pfa[d], 4) << "  holdout Pfa " << format_fixed(r.holdout_pfa[d], 4) << "\n";
    results[r.detectors[d]] = {{"auc", r.curves[d].auc},
                               {"threshold", r.thresholds[d]},
                               {"pd", r.pd[d]},
                               {"pfa", r.pfa[d]},
                               {"holdout_pfa", r.holdout_pfa[d]}};
  }
  write_text(layout.root / "calibration.csv", calib.str());
  m.output(layout.root / "calibration.csv");
  m.results = results;
  m.seeds = seeds.to_json();
  m.write(layout.manifest("roc"));
  return kExitOk;
}

int cmd_evaluate_sweep(const RunConfig& cfg, SweepAxis axis, std::ostream& out) {
  const Layout layout{cfg.output_dir};
  const auto base = load_suite(cfg, layout.pcd_model(), layout.gnn_model());
  const auto ds = load_ingested(cfg);
  SeedLedger seeds(cfg.seed);
  Manifest m{std::string("evaluate ") + to_string(axis), to_json(cfg)};
  m.model("pcd", layout.pcd_model());
  m.model("gnn", layout.gnn_model());

  std::map<int, DetectorSuite> per_samples;
  if (axis == SweepAxis::num_samples) {
    for (int n : cfg.experiment.samples_grid) {
      if (n == cfg.synth.samples_per_frame || per_samples.contains(n)) continue;
      const auto pcd_path = layout.pcd_model(n);
      const auto gnn_path = layout.gnn_model(n);
      if (!fs::exists(pcd_path)) {
        out << "training PCD for N=" << n << "\n";
        save_pcd_stage(layout, pcd_path, run_pcd_stage(cfg, ds, n, seeds));
      }
      if (!fs::exists(gnn_path)) {
        out << "training GNN for N=" << n << "\n";
        save_gnn_stage(layout, gnn_path, run_gnn_stage(cfg, ds, load_pcd(pcd_path), n, seeds));
      }
      per_samples.emplace(n, load_suite(cfg, pcd_path, gnn_path));
      m.model("pcd_n" + std::to_string(n), pcd_path);
      m.model("gnn_n" + std::to_string(n), gnn_path);
    }
  }
  const SuiteProvider provider = [&](double value) -> const DetectorSuite& {
    if (axis != SweepAxis::num_samples) return base;
    const auto it = per_samples.find(static_cast<int>(value));
    return it == per_samples.end() ? base : it->second;
  };
  const auto result = run_pd_sweep(axis, ds, provider, cfg.experiment, cfg.synth, seeds, cfg.workers);

  const auto path = layout.root / (std::string("pd_vs_") + to_string(axis) + ".csv");
  write_with(path, [&](std::ostream& s) { write_sweep_csv(s, result); });
  m.output(path);
  for (double v : result.skipped) {
    out << "skipped " << to_string(axis) << "=" << v << ": infeasible scenario\n";
  }
  for (const auto& row : result.rows) {
    out << to_string(axis) << '=' << row.axis_value << ' ' << std::left << std::setw(7) << row.detector << " Pd "
        << format_fixed(row.pd, 4) << " [" << format_fixed(row.ci.low, 4) << ", " << format_fixed(row.ci.high, 4)
        << "]\n";
  }
  m.seeds = seeds.to_json();
  m.results = {{"skipped", result.skipped}};
  m.write(layout.manifest(to_string(axis)));
  return kExitOk;
}

int cmd_inspect_graph(const RunConfig& cfg, std::uint64_t scenario_seed, const std::string& hypothesis,
                      const std::string& out_path, std::ostream& out) {
  const Layout layout{cfg.output_dir};
  const auto pcd = require_pcd(layout.pcd_model());
  const auto ds = load_ingested(cfg);
  ScenarioConfig scenario = cfg.experiment.scenario();
  scenario.seed = scenario_seed;
  scenario.hypothesis = hypothesis == "h0" ? Hypothesis::h0 : Hypothesis::h1;
  const auto g = build_graph(gen_sequence(ds, Split::test, scenario, cfg.synth), pcd);
  if (out_path.empty()) {
    write_edge_list(out, g);
  } else {
    write_with(out_path, [&](std::ostream& s) { write_edge_list(s, g); });
  }
  return kExitOk;
}

int cmd_simulate_survey(const std::string& out_path, std::uint64_t seed, std::ostream& out) {
  SurveyConfig survey;
  survey.seed = seed;
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_with(out_path, [&](std::ostream& s) { write_synthetic_survey(s, survey); });
  out << "wrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

fs::path Layout::pcd_model(int samples) const { return root / ("pcd_n" + std::to_string(samples) + ".json"); }
fs::path Layout::gnn_model(int samples) const { return root / ("gnn_n" + std::to_string(samples) + ".json"); }

void RunConfig::validate() const {
  if (dataset.empty()) throw ConfigError("dataset path is required");
  if (!fs::exists(dataset)) throw ConfigError("dataset file not found: " + dataset.string());
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (ingest.num_aps == 0) throw ConfigError("ingest.num_aps must be positive");
  if (!(test_frac >= 0.0 && val_frac >= 0.0 && test_frac + val_frac > 0.0 && test_frac + val_frac < 1.0)) {
    throw ConfigError("ingest fractions need 0 < test_frac + val_frac < 1");
  }
  synth.validate();
  if (pcd_pairs_per_class == 0 || pcd_val_pairs_per_class == 0) throw ConfigError("pcd pair counts must be positive");
  if (!(pcd_target_same_fa > 0.0 && pcd_target_same_fa < 1.0)) throw ConfigError("pcd.target_same_fa must be in (0, 1)");
  if (pcd_arch.hidden.empty()) throw ConfigError("pcd.hidden must list at least one layer");
  pcd_train.validate();
  if (gnn_train_graphs < 2 || gnn_val_graphs < 2) throw ConfigError("gnn graph counts must be at least 2");
  if (gnn_width == 0 || gnn_layers == 0) throw ConfigError("gnn width and layers must be positive");
  gnn_train.validate();
  for (const auto& b : baselines) b.validate();
  experiment.validate();
}

void apply_override(json& config, const std::string& flag) {
  const auto eq = flag.find('=');
  if (flag.rfind("--", 0) != 0 || eq == std::string::npos || eq == 2) {
    throw ConfigError("override '" + flag + "' is not of the form --section.key=value");
  }
  const std::string key = flag.substr(2, eq - 2);
  const std::string text = flag.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + flag + "' has an empty key");
    if (!node->is_object()) throw ConfigError("override '" + flag + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json load_config_json(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path.string() + " must be a JSON object");
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j, {"dataset", "output_dir", "seed", "workers", "ingest", "synth", "pcd", "gnn", "baselines", "experiment"},
               "config");
    if (!j.contains("seed")) throw ConfigError("seed is mandatory");
    if (!j.contains("dataset")) throw ConfigError("dataset path is required");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.dataset = j.at("dataset").get<std::string>();
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.workers = j.value("workers", c.workers);

    const auto& ingest = section(j, "ingest");
    check_keys(ingest, {"floor", "num_aps", "test_frac", "val_frac"}, "ingest");
    c.ingest.floor = ingest.value("floor", c.ingest.floor);
    c.ingest.num_aps = ingest.value("num_aps", c.ingest.num_aps);
    c.test_frac = ingest.value("test_frac", c.test_frac);
    c.val_frac = ingest.value("val_frac", c.val_frac);

    const auto& synth = section(j, "synth");
    check_keys(synth, {"samples_per_frame", "estimates_per_location", "noise_floor"}, "synth");
    c.synth.samples_per_frame = synth.value("samples_per_frame", c.synth.samples_per_frame);
    c.synth.estimates_per_location = synth.value("estimates_per_location", c.synth.estimates_per_location);
    c.synth.noise_floor = synth.value("noise_floor", c.synth.noise_floor);

    const auto& pcd = section(j, "pcd");
    check_keys(pcd,
               {"pairs_per_class", "val_pairs_per_class", "target_same_fa", "hidden", "leaky_slope", "epsilon_log",
                "learning_rate", "batch_size", "max_epochs", "early_stop_patience"},
               "pcd");
    c.pcd_pairs_per_class = pcd.value("pairs_per_class", c.pcd_pairs_per_class);
    c.pcd_val_pairs_per_class = pcd.value("val_pairs_per_class", c.pcd_val_pairs_per_class);
    c.pcd_target_same_fa = pcd.value("target_same_fa", c.pcd_target_same_fa);
    c.pcd_arch.hidden = pcd.value("hidden", c.pcd_arch.hidden);
    c.pcd_arch.leaky_slope = pcd.value("leaky_slope", c.pcd_arch.leaky_slope);
    c.pcd_arch.epsilon_log = pcd.value("epsilon_log", c.pcd_arch.epsilon_log);
    c.pcd_train = train_config_from(pcd, c.pcd_train);

    const auto& gnn = section(j, "gnn");
    check_keys(gnn,
               {"train_graphs", "val_graphs", "width", "layers", "learning_rate", "batch_size", "max_epochs",
                "early_stop_patience"},
               "gnn");
    c.gnn_train_graphs = gnn.value("train_graphs", c.gnn_train_graphs);
    c.gnn_val_graphs = gnn.value("val_graphs", c.gnn_val_graphs);
    c.gnn_width = gnn.value("width", c.gnn_width);
    c.gnn_layers = gnn.value("layers", c.gnn_layers);
    c.gnn_train = train_config_from(gnn, c.gnn_train);

    const auto& baselines = section(j, "baselines");
    check_keys(baselines, {"dbscan", "optics", "birch"}, "baselines");
    for (auto& b : c.baselines) {
      const std::string name = to_string(b.algorithm);
      const auto& params = section(baselines, name);
      b = cluster_detector_from_json(b.algorithm, params);
    }

    const auto& experiment = section(j, "experiment");
    check_keys(experiment,
               {"trials_per_hypothesis", "holdout_trials", "frame_rate", "num_frames", "speed", "target_pfa",
                "speed_grid", "frames_grid", "samples_grid"},
               "experiment");
    json e = experiment;
    e["samples_per_frame"] = c.synth.samples_per_frame;
    e["seed"] = c.seed;
    c.experiment = experiment_config_from_json(e);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json pcd = train_config_json(c.pcd_train);
  pcd["pairs_per_class"] = c.pcd_pairs_per_class;
  pcd["val_pairs_per_class"] = c.pcd_val_pairs_per_class;
  pcd["target_same_fa"] = c.pcd_target_same_fa;
  pcd["hidden"] = c.pcd_arch.hidden;
  pcd["leaky_slope"] = c.pcd_arch.leaky_slope;
  pcd["epsilon_log"] = c.pcd_arch.epsilon_log;
  json gnn = train_config_json(c.gnn_train);
  gnn["train_graphs"] = c.gnn_train_graphs;
  gnn["val_graphs"] = c.gnn_val_graphs;
  gnn["width"] = c.gnn_width;
  gnn["layers"] = c.gnn_layers;
  json baselines = json::object();
  for (const auto& b : c.baselines) baselines[to_string(b.algorithm)] = to_json(b);
  json experiment = to_json(c.experiment);
  experiment.erase("samples_per_frame");
  experiment.erase("seed");
  return {{"dataset", c.dataset.string()},
          {"output_dir", c.output_dir.string()},
          {"seed", c.seed},
          {"workers", c.workers},
          {"ingest",
           {{"floor", c.ingest.floor}, {"num_aps", c.ingest.num_aps}, {"test_frac", c.test_frac}, {"val_frac", c.val_frac}}},
          {"synth",
           {{"samples_per_frame", c.synth.samples_per_frame},
            {"estimates_per_location", c.synth.estimates_per_location},
            {"noise_floor", c.synth.noise_floor}}},
          {"pcd", pcd},
          {"gnn", gnn},
          {"baselines", baselines},
          {"experiment", experiment}};
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPrerequisiteError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed for " + path.string());
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

FingerprintDataset prepare_dataset(const RunConfig& cfg) {
  return split_locations(load_fingerprints(cfg.dataset, cfg.ingest), cfg.test_frac, cfg.val_frac,
                         derive_seed(cfg.seed, "ingest/split"));
}

void apply_split_csv(std::istream& in, FingerprintDataset& ds) {
  std::string line;
  if (!std::getline(in, line) || line != "location_id,split") throw ParseError("split file: bad header", 1);
  std::map<int, Split> by_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("split file: expected two fields", line_no);
    const std::string name = line.substr(comma + 1);
    Split s;
    if (name == "train") {
      s = Split::train;
    } else if (name == "val") {
      s = Split::val;
    } else if (name == "test") {
      s = Split::test;
    } else {
      throw ParseError("split file: unknown split '" + name + "'", line_no);
    }
    try {
      by_id[std::stoi(line.substr(0, comma))] = s;
    } catch (const std::exception&) {
      throw ParseError("split file: bad location id", line_no);
    }
  }
  std::vector<Split> split(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto it = by_id.find(ds.locations()[i].id);
    if (it == by_id.end()) {
      throw ConfigError("split file does not cover location " + std::to_string(ds.locations()[i].id) +
                        "; re-run `phyguard ingest`");
    }
    split[i] = it->second;
  }
  if (by_id.size() != ds.size()) throw ConfigError("split file lists unknown locations; re-run `phyguard ingest`");
  ds.assign_split(std::move(split));
}

PcdStage run_pcd_stage(const RunConfig& cfg, const FingerprintDataset& ds, int samples_per_frame,
                       SeedLedger& seeds) {
  SynthConfig synth = cfg.synth;
  synth.samples_per_frame = samples_per_frame;
  const auto train_pairs =
      build_pair_dataset(ds, synth, cfg.pcd_pairs_per_class, Split::train, seeds.derive("pcd-data", 0));
  const auto val_pairs =
      build_pair_dataset(ds, synth, cfg.pcd_val_pairs_per_class, Split::val, seeds.derive("pcd-data", 1));
  nn::TrainConfig train = cfg.pcd_train;
  train.seed = seeds.derive("pcd-init");
  auto result = train_pcd(train_pairs, val_pairs, train, cfg.pcd_arch);

  PcdStage stage;
  stage.model = std::move(result.model);
  stage.history = std::move(result.history);
  stage.val_accuracy = pair_accuracy(stage.model, val_pairs, 0.0);
  stage.model.threshold = calibrate_pcd_threshold(stage.model, val_pairs.same_pairs, cfg.pcd_target_same_fa);
  return stage;
}

GnnStage run_gnn_stage(const RunConfig& cfg, const FingerprintDataset& ds, const PcdModel& pcd,
                       int samples_per_frame, SeedLedger& seeds) {
  SynthConfig synth = cfg.synth;
  synth.samples_per_frame = samples_per_frame;
  const ScenarioConfig base = cfg.experiment.scenario();
  const auto& speeds = cfg.experiment.speed_grid;
  const auto train_graphs = make_graph_corpus(ds, Split::train, pcd, base, synth, speeds, cfg.gnn_train_graphs,
                                              seeds.derive("gnn-data", 0), cfg.workers);
  const auto val_graphs = make_graph_corpus(ds, Split::val, pcd, base, synth, speeds, cfg.gnn_val_graphs,
                                            seeds.derive("gnn-data", 1), cfg.workers);
  Rng init(seeds.derive("gnn-init"));
  GnnStage stage;
  stage.model = GnnModel::make(init, cfg.gnn_width, cfg.gnn_layers);
  nn::TrainConfig train = cfg.gnn_train;
  train.seed = seeds.derive("gnn-train");
  stage.history = train_gnn(stage.model, train_graphs, val_graphs, train);
  stage.val_auc = graph_auc(stage.model, val_graphs);
  return stage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Spoofing detection from RSS frame sequences: graph-based detector and clustering baselines",
               "phyguard"};
  cli.require_subcommand(1);

  std::string config_path;
  std::optional<std::size_t> workers;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--workers", workers, "Evaluation threads (default: all cores)");
    sub->allow_extras();
    sub->footer("Any config value can be overridden with --section.key=value.");
  };

  auto* ingest = cli.add_subcommand("ingest", "Load the dataset, split locations, write split.csv");
  common(ingest);

  auto* train = cli.add_subcommand("train", "Train a model");
  train->require_subcommand(1);
  auto* train_pcd_cmd = train->add_subcommand("pcd", "Train the position-change detector");
  auto* train_gnn_cmd = train->add_subcommand("gnn", "Train the graph classifier (needs the PCD)");
  common(train_pcd_cmd);
  common(train_gnn_cmd);

  auto* evaluate = cli.add_subcommand("evaluate", "Run an experiment and write CSVs plus a manifest");
  std::string experiment;
  evaluate->add_option("experiment", experiment, "roc | speed | frames | samples")
      ->required()
      ->check(CLI::IsMember({"roc", "speed", "frames", "samples"}));
  common(evaluate);

  auto* inspect = cli.add_subcommand("inspect", "Debugging dumps");
  inspect->require_subcommand(1);
  auto* inspect_graph = inspect->add_subcommand("graph", "Edge list of one scenario's detection graph");
  std::uint64_t scenario_seed = 0;
  std::string hypothesis = "h1";
  std::string graph_out;
  inspect_graph->add_option("scenario-seed", scenario_seed, "Scenario seed")->required();
  inspect_graph->add_option("--hypothesis", hypothesis, "h0 or h1")->check(CLI::IsMember({"h0", "h1"}));
  inspect_graph->add_option("--out", graph_out, "Write to a file instead of stdout");
  common(inspect_graph);

  auto* simulate = cli.add_subcommand("simulate-survey", "Write a synthetic multi-floor RSS survey CSV");
  std::string survey_out;
  std::uint64_t survey_seed = 1;
  simulate->add_option("--out", survey_out, "Output CSV path")->required();
  simulate->add_option("--seed", survey_seed, "Survey seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    cli.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate_survey(survey_out, survey_seed, out);

    CLI::App* leaf = nullptr;
    for (CLI::App* candidate : {ingest, train_pcd_cmd, train_gnn_cmd, evaluate, inspect_graph}) {
      if (candidate->parsed()) leaf = candidate;
    }
    auto j = load_config_json(config_path, leaf->remaining());
    if (workers) j["workers"] = *workers;
    const RunConfig cfg = run_config_from_json(j);

    if (leaf == ingest) return cmd_ingest(cfg, out);
    if (leaf == train_pcd_cmd) return cmd_train_pcd(cfg, out);
    if (leaf == train_gnn_cmd) return cmd_train_gnn(cfg, out);
    if (leaf == inspect_graph) return cmd_inspect_graph(cfg, scenario_seed, hypothesis, graph_out, out);
    if (experiment == "roc") return cmd_evaluate_roc(cfg, out);
    return cmd_evaluate_sweep(cfg, sweep_axis_from_string(experiment), out);
  } catch (const MissingPrerequisiteError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InsufficientDataError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleScenarioError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace phyguard::app
