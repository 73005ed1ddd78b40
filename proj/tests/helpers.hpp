// Shared construction helpers for the test suites.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wardflow/graph.hpp"
#include "wardflow/ingest.hpp"
#include "wardflow/isotime.hpp"
#include "wardflow/types.hpp"

namespace testutil {

inline std::string write_temp(const std::string& name, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "wardflow_tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

/// Graph from a weighted edge list over small integer venue ids.
inline wardflow::SnapshotGraph graph_from(
    int year, const std::vector<std::tuple<int, int, int>>& weighted_edges) {
  std::vector<wardflow::SnapshotGraph::Edge> edges;
  for (const auto& [o, d, w] : weighted_edges)
    edges.push_back({static_cast<std::uint32_t>(o), static_cast<std::uint32_t>(d),
                     static_cast<std::uint64_t>(w)});
  return wardflow::SnapshotGraph(year, std::move(edges));
}

/// Square ward [lat0, lat0+size] x [lon0, lon0+size].
inline wardflow::Ward square_ward(const std::string& code, double lat0, double lon0,
                                  double size, const std::string& borough = "B1",
                                  const std::string& sub_region = "Central",
                                  double area = 1.0) {
  wardflow::Ward w;
  w.ward_code = code;
  w.borough_code = borough;
  w.sub_region = sub_region;
  w.area_km2 = area;
  w.rings = {{{lat0, lon0},
              {lat0, lon0 + size},
              {lat0 + size, lon0 + size},
              {lat0 + size, lon0},
              {lat0, lon0}}};
  return w;
}

inline wardflow::WardTable ward_table(std::vector<wardflow::Ward> wards) {
  wardflow::WardTable t;
  for (auto& w : wards) {
    t.by_code.emplace(w.ward_code, static_cast<std::uint32_t>(t.wards.size()));
    t.wards.push_back(std::move(w));
  }
  t.input_features = t.wards.size();
  return t;
}

inline wardflow::VenueTable venue_table(
    const std::vector<std::tuple<std::string, double, double>>& entries) {
  wardflow::VenueTable t;
  for (const auto& [id, lat, lon] : entries) {
    wardflow::Venue v;
    v.id = id;
    v.lat = lat;
    v.lon = lon;
    v.created_at = wardflow::utc_epoch(2010, 6, 1);
    t.by_id.emplace(v.id, static_cast<std::uint32_t>(t.venues.size()));
    t.venues.push_back(std::move(v));
  }
  t.input_rows = t.venues.size();
  return t;
}

}  // namespace testutil
