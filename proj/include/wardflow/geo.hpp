#pragma once

#include <cmath>
#include <vector>

#include "wardflow/types.hpp"

namespace wardflow {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

/// Great-circle distance between two points, haversine form.
inline double great_circle_km(LatLon a, LatLon b) {
  double la1 = a.lat * kDegToRad, la2 = b.lat * kDegToRad;
  double dla = (b.lat - a.lat) * kDegToRad;
  double dlo = (b.lon - a.lon) * kDegToRad;
  double s1 = std::sin(dla / 2.0), s2 = std::sin(dlo / 2.0);
  double h = s1 * s1 + std::cos(la1) * std::cos(la2) * s2 * s2;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

/// True when p lies on the closed segment [a,b] within a small tolerance.
inline bool on_segment(LatLon p, LatLon a, LatLon b) {
  constexpr double eps = 1e-12;
  double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  if (std::fabs(cross) > eps) return false;
  double dot = (p.lon - a.lon) * (b.lon - a.lon) + (p.lat - a.lat) * (b.lat - a.lat);
  if (dot < -eps) return false;
  double len2 = (b.lon - a.lon) * (b.lon - a.lon) + (b.lat - a.lat) * (b.lat - a.lat);
  return dot <= len2 + eps;
}

/// Even-odd ray casting over all rings (outer + holes). Points exactly on an
/// edge count as inside.
inline bool point_in_rings(LatLon p, const std::vector<std::vector<LatLon>>& rings) {
  bool inside = false;
  for (const auto& ring : rings) {
    std::size_t n = ring.size();
    if (n < 2) continue;
    // Treat the ring as closed regardless of whether the closing vertex is stored.
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const LatLon& a = ring[j];
      const LatLon& b = ring[i];
      if (a.lat == b.lat && a.lon == b.lon) continue;  // stored closing vertex
      if (on_segment(p, a, b)) return true;
      bool crosses = ((a.lat > p.lat) != (b.lat > p.lat)) &&
                     (p.lon < (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon);
      if (crosses) inside = !inside;
    }
  }
  return inside;
}

struct Centroid {
  LatLon point;
  bool degenerate = false;  // zero-area fallback to vertex mean
};

/// Planar area centroid on an equirectangular projection about the vertex
/// mean. Holes (rings after the first) subtract. Adequate at city scale.
inline Centroid polygon_centroid(const std::vector<std::vector<LatLon>>& rings) {
  double mlat = 0.0, mlon = 0.0;
  std::size_t npts = 0;
  for (const auto& ring : rings)
    for (const auto& v : ring) {
      mlat += v.lat;
      mlon += v.lon;
      ++npts;
    }
  if (npts == 0) return {{0.0, 0.0}, true};
  mlat /= static_cast<double>(npts);
  mlon /= static_cast<double>(npts);
  double coslat = std::cos(mlat * kDegToRad);

  auto px = [&](const LatLon& v) { return (v.lon - mlon) * coslat; };
  auto py = [&](const LatLon& v) { return v.lat - mlat; };

  double total_area = 0.0, cx = 0.0, cy = 0.0;
  bool first = true;
  for (const auto& ring : rings) {
    std::size_t n = ring.size();
    if (n < 3) continue;
    double a = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      double x0 = px(ring[j]), y0 = py(ring[j]);
      double x1 = px(ring[i]), y1 = py(ring[i]);
      double w = x0 * y1 - x1 * y0;
      a += w;
      sx += (x0 + x1) * w;
      sy += (y0 + y1) * w;
    }
    a *= 0.5;
    if (a == 0.0) continue;
    double ring_cx = sx / (6.0 * a), ring_cy = sy / (6.0 * a);
    double sign = first ? 1.0 : -1.0;  // holes subtract
    double mass = sign * std::fabs(a);
    total_area += mass;
    cx += mass * ring_cx;
    cy += mass * ring_cy;
    first = false;
  }
  if (std::fabs(total_area) < 1e-15) return {{mlat, mlon}, true};
  cx /= total_area;
  cy /= total_area;
  return {{mlat + cy, mlon + cx / coslat}, false};
}

inline Centroid ward_centroid(const Ward& w) { return polygon_centroid(w.rings); }

/// Distance in km from the ward's area centroid to a configured centre point.
inline double ward_centroid_distance(const Ward& w, LatLon centre) {
  return great_circle_km(ward_centroid(w).point, centre);
}

}  // namespace wardflow
