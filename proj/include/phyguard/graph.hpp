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

#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "phyguard/pcd.hpp"
#include "phyguard/trajectory.hpp"

namespace phyguard {

/// Undirected, loop-free graph over the frames of a sequence. An edge joins
/// two frames the PCD considers co-located.
class DetectionGraph {
 public:
  explicit DetectionGraph(std::size_t num_nodes = 0);
  DetectionGraph(std::size_t num_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

  std::size_t num_nodes() const { return num_nodes_; }
  bool has_edge(std::size_t a, std::size_t b) const { return adjacency_[a * num_nodes_ + b] != 0; }
  void add_edge(std::size_t a, std::size_t b);
  std::size_t num_edges() const;
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return neighbors_[v]; }
  /// Edges (a, b) with a < b in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  /// k / (K - 1); 0 for a single node.
  const std::vector<double>& node_index_feature() const { return index_feature_; }
  /// Overrides the initial node features (one scalar per node).
  void set_node_index_feature(std::vector<double> feature);

  friend bool operator==(const DetectionGraph& a, const DetectionGraph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.adjacency_ == b.adjacency_;
  }

 private:
  std::size_t num_nodes_;
  std::vector<unsigned char> adjacency_;
  std::vector<std::vector<std::size_t>> neighbors_;  // ascending
  std::vector<double> index_feature_;
};

/// Edge (k, k') iff the pair statistic is at or below `threshold`.
DetectionGraph graph_from_statistic(std::size_t num_nodes,
                                    const std::function<double(std::size_t, std::size_t)>& statistic,
                                    double threshold);

/// Evaluates the PCD on all K(K-1)/2 frame pairs in one batch.
DetectionGraph build_graph(const FrameSequence& frames, const PcdModel& pcd);
DetectionGraph build_graph(std::span<const RssVector> frames, const PcdModel& pcd);

/// Connected components, each sorted, ordered by smallest member.
std::vector<std::vector<std::size_t>> graph_components(const DetectionGraph& g);

/// `K=<n>` header, then one `k k'` line per edge.
void write_edge_list(std::ostream& out, const DetectionGraph& g);
DetectionGraph read_edge_list(std::istream& in);

}  // namespace phyguard
