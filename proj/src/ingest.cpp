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

#include "phyguard/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>

#include "phyguard/error.hpp"
#include "phyguard/random.hpp"

namespace phyguard {
namespace {

constexpr std::string_view kHeader = "location_id,x,y,floor,ap_id,rss_dbm";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view text, std::string_view name, std::size_t line) {
  text = trim(text);
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("bad " + std::string(name) + " value '" + std::string(text) + "'", line);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ParseError("non-finite " + std::string(name), line);
  }
  return value;
}

}  // namespace

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: break;
  }
  return "unassigned";
}

std::vector<Observation> parse_observations(std::istream& in) {
  std::vector<Observation> rows;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty file, expected header", 1);
  ++line_no;
  std::string_view header = trim(line);
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  if (header != kHeader) {
    throw ParseError("expected header '" + std::string(kHeader) + "'", line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = trim(line);
    if (text.empty()) continue;
    std::string_view fields[6];
    std::size_t n = 0;
    while (true) {
      const auto comma = text.find(',');
      if (n == 6) throw ParseError("too many fields", line_no);
      fields[n++] = text.substr(0, comma);
      if (comma == std::string_view::npos) break;
      text.remove_prefix(comma + 1);
    }
    if (n != 6) throw ParseError("expected 6 fields, got " + std::to_string(n), line_no);
    Observation row;
    row.location_id = parse_field<int>(fields[0], "location_id", line_no);
    row.x = parse_field<double>(fields[1], "x", line_no);
    row.y = parse_field<double>(fields[2], "y", line_no);
    row.floor = parse_field<int>(fields[3], "floor", line_no);
    row.ap_id = parse_field<int>(fields[4], "ap_id", line_no);
    row.rss_dbm = parse_field<double>(fields[5], "rss_dbm", line_no);
    rows.push_back(row);
  }
  return rows;
}

std::vector<int> select_access_points(const std::vector<Observation>& rows, int floor,
                                      std::size_t count) {
  std::map<int, std::set<int>> heard_at;
  for (const auto& row : rows) {
    if (row.floor == floor) heard_at[row.ap_id].insert(row.location_id);
  }
  if (heard_at.size() < count) {
    throw ConfigError("requested " + std::to_string(count) + " access points but only " +
                      std::to_string(heard_at.size()) + " are observed on floor " +
                      std::to_string(floor));
  }
  std::vector<std::pair<std::size_t, int>> coverage;
  coverage.reserve(heard_at.size());
  for (const auto& [ap, locs] : heard_at) coverage.emplace_back(locs.size(), ap);
  std::sort(coverage.begin(), coverage.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> selected;
  for (std::size_t i = 0; i < count; ++i) selected.push_back(coverage[i].second);
  return selected;
}

FingerprintDataset::FingerprintDataset(std::vector<MeasurementLocation> locations,
                                       std::vector<int> selected_aps)
    : locations_(std::move(locations)),
      selected_aps_(std::move(selected_aps)),
      split_(locations_.size(), Split::unassigned) {
  std::set<std::pair<double, double>> seen;
  for (const auto& loc : locations_) {
    require(std::isfinite(loc.xy.x) && std::isfinite(loc.xy.y), "location coordinates must be finite");
    require(loc.true_rss.size() == selected_aps_.size(),
            "location " + std::to_string(loc.id) + " lacks a value for some access point");
    for (double w : loc.true_rss) {
      require(std::isfinite(w) && w > 0.0, "true RSS must be positive and finite");
    }
    if (!seen.emplace(loc.xy.x, loc.xy.y).second) {
      throw PreconditionError("two locations share coordinates (" + std::to_string(loc.xy.x) + ", " +
                              std::to_string(loc.xy.y) + ")");
    }
  }
}

void FingerprintDataset::assign_split(std::vector<Split> split) {
  require(split.size() == locations_.size(), "split assignment size mismatch");
  split_ = std::move(split);
}

std::vector<std::size_t> FingerprintDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (split_[i] == split) out.push_back(i);
  }
  return out;
}

BoundingBox FingerprintDataset::bounding_box(Split split) const {
  const auto idx = indices(split);
  if (idx.empty()) throw InsufficientDataError(std::string("split '") + to_string(split) + "' is empty");
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{{inf, inf}, {-inf, -inf}};
  for (auto i : idx) {
    const auto& p = locations_[i].xy;
    box.lo.x = std::min(box.lo.x, p.x);
    box.lo.y = std::min(box.lo.y, p.y);
    box.hi.x = std::max(box.hi.x, p.x);
    box.hi.y = std::max(box.hi.y, p.y);
  }
  return box;
}

FingerprintDataset build_dataset(const std::vector<Observation>& rows, const IngestConfig& config) {
  if (config.num_aps == 0) throw ConfigError("num_aps must be positive");
  const auto aps = select_access_points(rows, config.floor, config.num_aps);

  struct Pending {
    Point2 xy;
    std::map<int, double> dbm;
  };
  std::map<int, Pending> by_id;
  std::size_t line = 1;
  for (const auto& row : rows) {
    ++line;
    if (row.floor != config.floor) continue;
    auto [it, inserted] = by_id.try_emplace(row.location_id, Pending{{row.x, row.y}, {}});
    if (!inserted && !(it->second.xy == Point2{row.x, row.y})) {
      throw ParseError("location " + std::to_string(row.location_id) + " has conflicting coordinates", line);
    }
    if (!it->second.dbm.emplace(row.ap_id, row.rss_dbm).second) {
      throw ParseError("duplicate measurement of ap " + std::to_string(row.ap_id) + " at location " +
                           std::to_string(row.location_id),
                       line);
    }
  }

  std::vector<MeasurementLocation> locations;
  for (const auto& [id, pending] : by_id) {
    MeasurementLocation loc{id, pending.xy, {}};
    for (int ap : aps) {
      auto found = pending.dbm.find(ap);
      if (found == pending.dbm.end()) break;
      loc.true_rss.push_back(dbm_to_watts(found->second));
    }
    if (loc.true_rss.size() == aps.size()) locations.push_back(std::move(loc));
  }
  if (locations.size() < kMinLocations) {
    throw InsufficientDataError("only " + std::to_string(locations.size()) +
                                " locations on floor " + std::to_string(config.floor) +
                                " observe all selected access points (need " +
                                std::to_string(kMinLocations) + ")");
  }
  return FingerprintDataset(std::move(locations), aps);
}

FingerprintDataset load_fingerprints(std::istream& in, const IngestConfig& config) {
  return build_dataset(parse_observations(in), config);
}

FingerprintDataset load_fingerprints(const std::filesystem::path& path, const IngestConfig& config) {
  std::ifstream in(path);
  if (!in) throw MissingPrerequisiteError("cannot open dataset file " + path.string());
  return load_fingerprints(in, config);
}

FingerprintDataset split_locations(FingerprintDataset ds, double test_frac, double val_frac,
                                   std::uint64_t seed) {
  if (!(test_frac >= 0.0 && val_frac >= 0.0 && test_frac + val_frac > 0.0 && test_frac + val_frac < 1.0)) {
    throw ConfigError("split fractions must be nonnegative with 0 < test_frac + val_frac < 1");
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  if (n_test + n_val >= n) throw ConfigError("split leaves no training locations");

  std::vector<Split> split(n, Split::train);
  for (std::size_t i = 0; i < n_test; ++i) split[order[i]] = Split::test;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) split[order[i]] = Split::val;
  ds.assign_split(std::move(split));
  return ds;
}

void write_split_csv(std::ostream& out, const FingerprintDataset& ds) {
  out << "location_id,split\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.locations()[i].id << ',' << to_string(ds.split_of(i)) << '\n';
  }
}

}  // namespace phyguard
