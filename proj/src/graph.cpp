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

#include "phyguard/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "phyguard/error.hpp"

namespace phyguard {

DetectionGraph::DetectionGraph(std::size_t num_nodes)
    : num_nodes_(num_nodes),
      adjacency_(num_nodes * num_nodes, 0),
      neighbors_(num_nodes),
      index_feature_(num_nodes, 0.0) {
  for (std::size_t k = 0; k < num_nodes && num_nodes > 1; ++k) {
    index_feature_[k] = static_cast<double>(k) / static_cast<double>(num_nodes - 1);
  }
}

DetectionGraph::DetectionGraph(std::size_t num_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
    : DetectionGraph(num_nodes) {
  for (const auto& [a, b] : edges) add_edge(a, b);
}

void DetectionGraph::set_node_index_feature(std::vector<double> feature) {
  require(feature.size() == num_nodes_, "one feature per node required");
  index_feature_ = std::move(feature);
}

void DetectionGraph::add_edge(std::size_t a, std::size_t b) {
  require(a < num_nodes_ && b < num_nodes_, "edge endpoint out of range");
  require(a != b, "self-loops are not allowed");
  if (has_edge(a, b)) return;
  adjacency_[a * num_nodes_ + b] = 1;
  adjacency_[b * num_nodes_ + a] = 1;
  neighbors_[a].insert(std::upper_bound(neighbors_[a].begin(), neighbors_[a].end(), b), b);
  neighbors_[b].insert(std::upper_bound(neighbors_[b].begin(), neighbors_[b].end(), a), a);
}

std::size_t DetectionGraph::num_edges() const {
  std::size_t twice = 0;
  for (const auto& n : neighbors_) twice += n.size();
  return twice / 2;
}

std::vector<std::pair<std::size_t, std::size_t>> DetectionGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < num_nodes_; ++a) {
    for (auto b : neighbors_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

DetectionGraph graph_from_statistic(std::size_t num_nodes,
                                    const std::function<double(std::size_t, std::size_t)>& statistic,
                                    double threshold) {
  DetectionGraph g(num_nodes);
  for (std::size_t a = 0; a < num_nodes; ++a) {
    for (std::size_t b = a + 1; b < num_nodes; ++b) {
      if (statistic(a, b) <= threshold) g.add_edge(a, b);
    }
  }
  return g;
}

DetectionGraph build_graph(std::span<const RssVector> frames, const PcdModel& pcd) {
  require(frames.size() >= 2, "a detection graph needs at least two frames");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(frames.size() * (frames.size() - 1) / 2);
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = a + 1; b < frames.size(); ++b) pairs.emplace_back(a, b);
  }
  const auto stats = pcd_pair_statistics(pcd, frames, pairs);
  DetectionGraph g(frames.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (!std::isfinite(stats[p])) throw NumericalError("non-finite PCD statistic");
    if (stats[p] <= pcd.threshold) g.add_edge(pairs[p].first, pairs[p].second);
  }
  return g;
}

DetectionGraph build_graph(const FrameSequence& frames, const PcdModel& pcd) {
  return build_graph(std::span<const RssVector>(frames.features), pcd);
}

std::vector<std::vector<std::size_t>> graph_components(const DetectionGraph& g) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> seen(g.num_nodes(), false);
  for (std::size_t root = 0; root < g.num_nodes(); ++root) {
    if (seen[root]) continue;
    std::vector<std::size_t> component, stack{root};
    seen[root] = true;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      component.push_back(v);
      for (auto u : g.neighbors(v)) {
        if (!seen[u]) {
          seen[u] = true;
          stack.push_back(u);
        }
      }
    }
    std::sort(component.begin(), component.end());
    out.push_back(std::move(component));
  }
  return out;
}

void write_edge_list(std::ostream& out, const DetectionGraph& g) {
  out << "K=" << g.num_nodes() << '\n';
  for (const auto& [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

DetectionGraph read_edge_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("K=", 0) != 0) throw ParseError("expected 'K=<n>' header", 1);
  std::size_t k = 0;
  try {
    k = std::stoul(line.substr(2));
  } catch (const std::exception&) {
    throw ParseError("bad node count", 1);
  }
  DetectionGraph g(k);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t a = 0, b = 0;
    std::string rest;
    if (!(fields >> a >> b) || (fields >> rest) || a >= k || b >= k || a == b) {
      throw ParseError("bad edge '" + line + "'", line_no);
    }
    g.add_edge(a, b);
  }
  return g;
}

}  // namespace phyguard
