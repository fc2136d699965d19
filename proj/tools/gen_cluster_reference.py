# Copyright 2026 The phyguard Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates tests/data/cluster_reference.json with scikit-learn."""

import json, numpy as np
from sklearn.cluster import OPTICS, Birch, DBSCAN
rng = np.random.default_rng(20261016)
cases = []
for c in range(60):
    K = int(rng.integers(3, 45)); D = int(rng.integers(2, 6))
    centers = rng.uniform(-90, -40, size=(int(rng.integers(1, 5)), D))
    spread = float(rng.choice([1.0, 3.0, 6.0]))
    X = np.round(centers[rng.integers(0, len(centers), K)] + rng.normal(0, spread, (K, D)), 4)
    ms = int(rng.choice([2, 3]))
    case = {"points": X.tolist(), "min_pts": ms,
            "dbscan": DBSCAN(eps=6.0, min_samples=ms).fit(X).labels_.tolist(),
            "optics": OPTICS(min_samples=ms, xi=0.05, min_cluster_size=ms).fit(X).labels_.tolist()}
    def count(l): return len({v for v in l if v != -1}) + sum(1 for v in l if v == -1)
    case["birch_6_50"] = count(Birch(n_clusters=None, threshold=6.0, branching_factor=50).fit(X).labels_)
    case["birch_2_3"] = count(Birch(n_clusters=None, threshold=2.0, branching_factor=3).fit(X).labels_)
    cases.append(case)
json.dump({"cases": cases}, open("tests/data/cluster_reference.json", "w"))
