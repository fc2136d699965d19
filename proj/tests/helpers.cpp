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

#include "helpers.hpp"

#include "phyguard/synth.hpp"

namespace phyguard::testing {

const FingerprintDataset& small_dataset() {
  static const FingerprintDataset ds = split_locations(grid_dataset(12, 8, 2.0, 5), 0.25, 0.15, 3);
  return ds;
}

const PcdModel& small_trained_pcd() {
  static const PcdModel model = [] {
    SynthConfig synth;
    synth.estimates_per_location = 50;
    const auto& ds = small_dataset();
    const auto train = build_pair_dataset(ds, synth, 3000, Split::train, 11);
    const auto val = build_pair_dataset(ds, synth, 500, Split::val, 12);
    nn::TrainConfig cfg;
    cfg.max_epochs = 15;
    cfg.early_stop_patience = 5;
    cfg.batch_size = 64;
    cfg.seed = 5;
    PcdArchitecture arch;
    arch.hidden = {32, 32};
    auto trained = train_pcd(train, val, cfg, arch);
    trained.model.threshold = calibrate_pcd_threshold(trained.model, val.same_pairs, 0.05);
    return trained.model;
  }();
  return model;
}

}  // namespace phyguard::testing
