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

#include "phyguard/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

#include "phyguard/error.hpp"
#include "phyguard/ingest.hpp"

namespace phyguard {
namespace {

constexpr int kUnvisited = -2;
constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<std::vector<double>> distance_matrix(const PointSet& points) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    require(points[i].size() == points.front().size(), "points must share one dimension");
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = euclidean(points[i], points[j]);
  }
  return d;
}

// --- xi-steep cluster extraction over a reachability plot ------------------

struct SteepDownArea {
  std::size_t start;
  std::size_t end;
  double mib;
};

std::size_t extend_region(const std::vector<bool>& steep, const std::vector<bool>& xward, std::size_t start,
                          std::size_t min_pts) {
  const std::size_t n = steep.size();
  std::size_t non_xward = 0;
  std::size_t end = start;
  for (std::size_t index = start; index < n; ++index) {
    if (steep[index]) {
      non_xward = 0;
      end = index;
    } else if (!xward[index]) {
      // Not steep, and not going the other way either.
      if (++non_xward > min_pts) break;
    } else {
      return end;
    }
  }
  return end;
}

void update_filter_sdas(std::vector<SteepDownArea>& sdas, double mib, double xi_complement,
                        const std::vector<double>& plot) {
  if (std::isinf(mib)) {
    sdas.clear();
    return;
  }
  std::erase_if(sdas, [&](const SteepDownArea& s) { return !(mib <= plot[s.start] * xi_complement); });
  for (auto& s : sdas) s.mib = std::max(s.mib, mib);
}

bool correct_predecessor(const std::vector<double>& plot, const std::vector<long>& pred_plot,
                         const std::vector<std::size_t>& order, std::size_t s, std::size_t& e) {
  while (s < e) {
    if (plot[s] > plot[e]) return true;
    const long p_e = pred_plot[e];
    for (std::size_t i = s; i < e; ++i) {
      if (p_e == static_cast<long>(order[i])) return true;
    }
    --e;
  }
  return false;
}

std::vector<std::pair<std::size_t, std::size_t>> xi_clusters(const OpticsOrdering& o, double xi, std::size_t min_pts,
                                                             std::size_t min_cluster_size) {
  const std::size_t n = o.order.size();
  std::vector<double> plot(n + 1);
  std::vector<long> pred_plot(n);
  for (std::size_t i = 0; i < n; ++i) {
    plot[i] = o.reachability[o.order[i]];
    pred_plot[i] = o.predecessor[o.order[i]];
  }
  plot[n] = kInf;  // lets a cluster close at the end of the plot

  const double xi_complement = 1.0 - xi;
  std::vector<bool> steep_up(n), steep_down(n), up(n), down(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = plot[i] / plot[i + 1];  // NaN for inf/inf and 0/0: all tests false
    steep_up[i] = ratio <= xi_complement;
    steep_down[i] = ratio >= 1.0 / xi_complement;
    down[i] = ratio > 1.0;
    up[i] = ratio < 1.0;
  }

  std::vector<SteepDownArea> sdas;
  std::vector<std::pair<std::size_t, std::size_t>> clusters;
  std::size_t index = 0;
  double mib = 0.0;
  for (std::size_t steep = 0; steep < n; ++steep) {
    if (!(steep_up[steep] || steep_down[steep]) || steep < index) continue;
    for (std::size_t i = index; i <= steep; ++i) mib = std::max(mib, plot[i]);

    if (steep_down[steep]) {
      update_filter_sdas(sdas, mib, xi_complement, plot);
      const std::size_t d_end = extend_region(steep_down, up, steep, min_pts);
      sdas.push_back({steep, d_end, 0.0});
      index = d_end + 1;
      mib = plot[index];
      continue;
    }

    update_filter_sdas(sdas, mib, xi_complement, plot);
    const std::size_t u_start = steep;
    const std::size_t u_end = extend_region(steep_up, down, u_start, min_pts);
    index = u_end + 1;
    mib = plot[index];

    std::vector<std::pair<std::size_t, std::size_t>> found;
    for (const auto& sda : sdas) {
      std::size_t c_start = sda.start;
      std::size_t c_end = u_end;
      if (plot[c_end + 1] * xi_complement < sda.mib) continue;

      const double d_max = plot[sda.start];
      if (d_max * xi_complement >= plot[c_end + 1]) {
        while (plot[c_start + 1] > plot[c_end + 1] && c_start < sda.end) ++c_start;
      } else if (plot[c_end + 1] * xi_complement >= d_max) {
        while (plot[c_end - 1] > d_max && c_end > u_start) --c_end;
      }
      if (!correct_predecessor(plot, pred_plot, o.order, c_start, c_end)) continue;
      if (c_end - c_start + 1 < min_cluster_size) continue;
      if (c_start > sda.end) continue;
      if (c_end < u_start) continue;
      found.emplace_back(c_start, c_end);
    }
    // Smaller (nested) clusters first.
    clusters.insert(clusters.end(), found.rbegin(), found.rend());
  }
  return clusters;
}

// --- BIRCH CF-tree -------------------------------------------------------

struct CfNode;

struct Subcluster {
  std::size_t n = 0;
  std::vector<double> linear_sum;
  double squared_sum = 0.0;
  std::unique_ptr<CfNode> child;

  std::vector<double> centroid() const {
    std::vector<double> c(linear_sum);
    for (double& v : c) v /= static_cast<double>(n);
    return c;
  }
  void absorb(const Subcluster& other) {
    n += other.n;
    for (std::size_t i = 0; i < linear_sum.size(); ++i) linear_sum[i] += other.linear_sum[i];
    squared_sum += other.squared_sum;
  }
  bool try_merge(const Subcluster& other, double threshold) {
    const double new_n = static_cast<double>(n + other.n);
    double centroid_sq = 0.0;
    for (std::size_t i = 0; i < linear_sum.size(); ++i) {
      const double c = (linear_sum[i] + other.linear_sum[i]) / new_n;
      centroid_sq += c * c;
    }
    const double sq_radius = (squared_sum + other.squared_sum) / new_n - centroid_sq;
    if (sq_radius > threshold * threshold) return false;
    absorb(other);
    return true;
  }
};

struct CfNode {
  bool leaf = true;
  std::vector<Subcluster> entries;
};

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Subcluster summarize(CfNode& node) {
  Subcluster s;
  s.linear_sum.assign(node.entries.front().linear_sum.size(), 0.0);
  for (const auto& e : node.entries) s.absorb(e);
  return s;
}

// Splits `node` around its farthest pair of subclusters.
std::pair<Subcluster, Subcluster> split_node(CfNode& node) {
  const std::size_t m = node.entries.size();
  std::vector<std::vector<double>> centroids;
  for (const auto& e : node.entries) centroids.push_back(e.centroid());
  std::size_t fa = 0, fb = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = squared_distance(centroids[i], centroids[j]);
      if (d > best) {
        best = d;
        fa = i;
        fb = j;
      }
    }
  }
  auto left = std::make_unique<CfNode>();
  auto right = std::make_unique<CfNode>();
  left->leaf = right->leaf = node.leaf;
  for (std::size_t i = 0; i < m; ++i) {
    const bool to_left = i == fa || (i != fb && squared_distance(centroids[i], centroids[fa]) <
                                                    squared_distance(centroids[i], centroids[fb]));
    (to_left ? left : right)->entries.push_back(std::move(node.entries[i]));
  }
  Subcluster a = summarize(*left);
  Subcluster b = summarize(*right);
  a.child = std::move(left);
  b.child = std::move(right);
  return {std::move(a), std::move(b)};
}

class CfTree {
 public:
  CfTree(std::size_t branching, double threshold) : branching_(branching), threshold_(threshold) {}

  void insert(const std::vector<double>& point) {
    Subcluster s;
    s.n = 1;
    s.linear_sum = point;
    s.squared_sum = 0.0;
    for (double v : point) s.squared_sum += v * v;
    if (insert_into(*root_, std::move(s))) {
      auto [a, b] = split_node(*root_);
      root_ = std::make_unique<CfNode>();
      root_->leaf = false;
      root_->entries.push_back(std::move(a));
      root_->entries.push_back(std::move(b));
    }
  }

  std::vector<std::vector<double>> leaf_centroids() const {
    std::vector<std::vector<double>> out;
    collect(*root_, out);
    return out;
  }

 private:
  // Returns true when `node` overflowed and must be split by its parent.
  bool insert_into(CfNode& node, Subcluster s) {
    if (node.entries.empty()) {
      node.entries.push_back(std::move(s));
      return false;
    }
    const auto c = s.centroid();
    std::size_t closest = 0;
    double best = kInf;
    for (std::size_t i = 0; i < node.entries.size(); ++i) {
      const double d = squared_distance(node.entries[i].centroid(), c);
      if (d < best) {
        best = d;
        closest = i;
      }
    }
    Subcluster& target = node.entries[closest];
    if (target.child) {
      const Subcluster copy{s.n, s.linear_sum, s.squared_sum, nullptr};
      if (!insert_into(*target.child, std::move(s))) {
        target.absorb(copy);
        return false;
      }
      auto [a, b] = split_node(*target.child);
      node.entries[closest] = std::move(a);
      node.entries.push_back(std::move(b));
      return node.entries.size() > branching_;
    }
    if (target.try_merge(s, threshold_)) return false;
    node.entries.push_back(std::move(s));
    return node.entries.size() > branching_;
  }

  static void collect(const CfNode& node, std::vector<std::vector<double>>& out) {
    for (const auto& e : node.entries) {
      if (node.leaf) {
        out.push_back(e.centroid());
      } else {
        collect(*e.child, out);
      }
    }
  }

  std::size_t branching_;
  double threshold_;
  std::unique_ptr<CfNode> root_ = std::make_unique<CfNode>();
};

}  // namespace

std::vector<int> dbscan(const PointSet& points, const DbscanParams& params) {
  require(params.eps > 0.0 && params.min_pts >= 1, "DBSCAN needs eps > 0 and min_pts >= 1");
  const std::size_t n = points.size();
  const auto dist = distance_matrix(points);
  auto neighbours = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q) {
      if (dist[p][q] <= params.eps) out.push_back(q);
    }
    return out;
  };

  std::vector<int> labels(n, kUnvisited);
  int cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] != kUnvisited) continue;
    auto seeds = neighbours(p);
    if (seeds.size() < params.min_pts) {
      labels[p] = kNoise;
      continue;
    }
    labels[p] = cluster;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const std::size_t q = seeds[i];
      if (labels[q] == kNoise) labels[q] = cluster;  // border point
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      auto more = neighbours(q);
      if (more.size() >= params.min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  return labels;
}

OpticsOrdering optics_ordering(const PointSet& points, std::size_t min_pts) {
  require(min_pts >= 1, "OPTICS needs min_pts >= 1");
  const std::size_t n = points.size();
  const auto dist = distance_matrix(points);
  OpticsOrdering o;
  o.reachability.assign(n, kInf);
  o.core_distance.assign(n, kInf);
  o.predecessor.assign(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    if (min_pts > n) break;
    std::vector<double> row = dist[p];
    std::nth_element(row.begin(), row.begin() + static_cast<long>(min_pts - 1), row.end());
    o.core_distance[p] = row[min_pts - 1];
  }
  std::vector<bool> processed(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t p = n;
    for (std::size_t q = 0; q < n; ++q) {
      if (!processed[q] && (p == n || o.reachability[q] < o.reachability[p])) p = q;
    }
    processed[p] = true;
    o.order.push_back(p);
    if (std::isinf(o.core_distance[p])) continue;
    for (std::size_t q = 0; q < n; ++q) {
      if (processed[q]) continue;
      const double reach = std::max(o.core_distance[p], dist[p][q]);
      if (reach < o.reachability[q]) {
        o.reachability[q] = reach;
        o.predecessor[q] = static_cast<long>(p);
      }
    }
  }
  return o;
}

std::vector<int> optics(const PointSet& points, const OpticsParams& params) {
  require(params.min_pts >= 1, "OPTICS needs min_pts >= 1");
  require(params.xi > 0.0 && params.xi < 1.0, "OPTICS xi must be in (0, 1)");
  const std::size_t n = points.size();
  const auto ordering = optics_ordering(points, params.min_pts);
  const auto clusters = xi_clusters(ordering, params.xi, params.min_pts, std::max<std::size_t>(2, params.min_pts));

  std::vector<int> by_position(n, kNoise);
  int label = 0;
  for (const auto& [start, end] : clusters) {
    const bool free = std::all_of(by_position.begin() + static_cast<long>(start),
                                  by_position.begin() + static_cast<long>(end) + 1, [](int l) { return l == kNoise; });
    if (!free) continue;
    std::fill(by_position.begin() + static_cast<long>(start), by_position.begin() + static_cast<long>(end) + 1, label);
    ++label;
  }
  std::vector<int> labels(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) labels[ordering.order[i]] = by_position[i];
  return labels;
}

std::vector<int> birch(const PointSet& points, const BirchParams& params) {
  require(params.branching_factor >= 2 && params.threshold > 0.0,
          "BIRCH needs branching_factor >= 2 and threshold > 0");
  if (points.empty()) return {};
  CfTree tree(params.branching_factor, params.threshold);
  for (const auto& p : points) tree.insert(p);
  const auto centroids = tree.leaf_centroids();
  std::vector<int> labels(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = kInf;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(points[i], centroids[c]);
      if (d < best) {
        best = d;
        labels[i] = static_cast<int>(c);
      }
    }
  }
  return labels;
}

std::size_t count_clusters(std::span<const int> labels) {
  std::set<int> clusters;
  std::size_t noise = 0;
  for (int l : labels) {
    if (l == kNoise) {
      ++noise;
    } else {
      clusters.insert(l);
    }
  }
  return clusters.size() + noise;
}

const char* to_string(ClusterAlgorithm a) {
  switch (a) {
    case ClusterAlgorithm::optics: return "optics";
    case ClusterAlgorithm::birch: return "birch";
    case ClusterAlgorithm::dbscan: break;
  }
  return "dbscan";
}

ClusterAlgorithm cluster_algorithm_from_string(const std::string& name) {
  if (name == "dbscan") return ClusterAlgorithm::dbscan;
  if (name == "optics") return ClusterAlgorithm::optics;
  if (name == "birch") return ClusterAlgorithm::birch;
  throw ConfigError("unknown clustering algorithm '" + name + "'");
}

void ClusterDetector::validate() const {
  if (threshold < 1) throw ConfigError("cluster-count threshold must be >= 1");
  switch (algorithm) {
    case ClusterAlgorithm::dbscan:
      if (!(dbscan.eps > 0.0) || dbscan.min_pts < 1) throw ConfigError("dbscan needs eps > 0 and min_pts >= 1");
      break;
    case ClusterAlgorithm::optics:
      if (optics.min_pts < 1 || !(optics.xi > 0.0 && optics.xi < 1.0)) {
        throw ConfigError("optics needs min_pts >= 1 and 0 < xi < 1");
      }
      break;
    case ClusterAlgorithm::birch:
      if (birch.branching_factor < 2 || !(birch.threshold > 0.0)) {
        throw ConfigError("birch needs branching_factor >= 2 and threshold > 0");
      }
      break;
  }
}

PointSet to_db_points(std::span<const RssVector> frames) {
  PointSet out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    std::vector<double> p;
    p.reserve(f.size());
    for (double w : f) {
      require(w > 0.0 && std::isfinite(w), "RSS entries must be positive and finite");
      p.push_back(watts_to_dbm(w));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t cluster_count(const ClusterDetector& detector, std::span<const RssVector> frames) {
  detector.validate();
  require(!frames.empty(), "cannot cluster an empty frame sequence");
  const auto points = to_db_points(frames);
  switch (detector.algorithm) {
    case ClusterAlgorithm::optics: return count_clusters(optics(points, detector.optics));
    case ClusterAlgorithm::birch: return count_clusters(birch(points, detector.birch));
    case ClusterAlgorithm::dbscan: break;
  }
  return count_clusters(dbscan(points, detector.dbscan));
}

std::size_t cluster_count(const ClusterDetector& detector, const FrameSequence& frames) {
  return cluster_count(detector, std::span<const RssVector>(frames.features));
}

int calibrate_threshold(std::span<const std::size_t> h0_counts, double target_pfa) {
  if (h0_counts.empty()) throw InsufficientDataError("no H0 trials to calibrate on");
  if (h0_counts.size() < kMinCalibrationTrials) {
    throw PreconditionError("calibration needs at least " + std::to_string(kMinCalibrationTrials) + " H0 trials");
  }
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) throw ConfigError("target_pfa must be in (0, 1)");
  const std::size_t n = h0_counts.size();
  const std::size_t max_count = *std::max_element(h0_counts.begin(), h0_counts.end());
  for (std::size_t tau = 1;; ++tau) {
    const auto above = static_cast<std::size_t>(
        std::count_if(h0_counts.begin(), h0_counts.end(), [tau](std::size_t c) { return c > tau; }));
    if (static_cast<double>(above) <= target_pfa * static_cast<double>(n) + 1e-9 || tau >= max_count) {
      return static_cast<int>(tau);
    }
  }
}

nlohmann::json to_json(const ClusterDetector& d) {
  switch (d.algorithm) {
    case ClusterAlgorithm::optics: return {{"min_pts", d.optics.min_pts}, {"xi", d.optics.xi}};
    case ClusterAlgorithm::birch:
      return {{"branching_factor", d.birch.branching_factor}, {"threshold", d.birch.threshold}};
    case ClusterAlgorithm::dbscan: break;
  }
  return {{"eps", d.dbscan.eps}, {"min_pts", d.dbscan.min_pts}};
}

ClusterDetector cluster_detector_from_json(ClusterAlgorithm algorithm, const nlohmann::json& j) {
  ClusterDetector d;
  d.algorithm = algorithm;
  switch (algorithm) {
    case ClusterAlgorithm::dbscan:
      d.dbscan.eps = j.value("eps", d.dbscan.eps);
      d.dbscan.min_pts = j.value("min_pts", d.dbscan.min_pts);
      break;
    case ClusterAlgorithm::optics:
      d.optics.min_pts = j.value("min_pts", d.optics.min_pts);
      d.optics.xi = j.value("xi", d.optics.xi);
      break;
    case ClusterAlgorithm::birch:
      d.birch.branching_factor = j.value("branching_factor", d.birch.branching_factor);
      d.birch.threshold = j.value("threshold", d.birch.threshold);
      break;
  }
  d.validate();
  return d;
}

}  // namespace phyguard
