// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fleet/telemetry.hpp"

namespace fleet::geo {

inline constexpr double kEarthRadiusM = 6371000.0;

inline constexpr double to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Great-circle distance on a sphere of radius 6 371 km.
inline double haversine_m(LatLon a, LatLon b) {
  const double phi1 = to_rad(a.lat);
  const double phi2 = to_rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = to_rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

/// Planar east/north coordinates in meters about a reference latitude.
struct LocalXY {
  double x = 0.0;
  double y = 0.0;
};

/// Local equirectangular frame centred on `origin`.
class LocalFrame {
 public:
  explicit LocalFrame(LatLon origin) : origin_(origin), cos_lat_(std::cos(to_rad(origin.lat))) {}

  LocalXY project(LatLon p) const {
    double dlon = p.lon - origin_.lon;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    return {kEarthRadiusM * to_rad(dlon) * cos_lat_, kEarthRadiusM * to_rad(p.lat - origin_.lat)};
  }

  LatLon unproject(LocalXY xy) const {
    return {origin_.lat + to_deg(xy.y / kEarthRadiusM), origin_.lon + to_deg(xy.x / (kEarthRadiusM * cos_lat_))};
  }

 private:
  LatLon origin_;
  double cos_lat_;
};

/// Minimum distance from `p` to the segment a-b, measured in a local
/// equirectangular projection about the segment midpoint. Falls back to the
/// nearest endpoint when the perpendicular foot lies outside the segment.
inline double cross_track_distance_m(LatLon p, LatLon a, LatLon b) {
  const LocalFrame frame({(a.lat + b.lat) / 2.0, (a.lon + b.lon) / 2.0});
  const LocalXY pa = frame.project(a);
  const LocalXY pb = frame.project(b);
  const LocalXY pp = frame.project(p);
  const double dx = pb.x - pa.x;
  const double dy = pb.y - pa.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((pp.x - pa.x) * dx + (pp.y - pa.y) * dy) / len2, 0.0, 1.0);
  const double fx = pa.x + t * dx - pp.x;
  const double fy = pa.y + t * dy - pp.y;
  return std::hypot(fx, fy);
}

/// Point at `fraction` of the way from a to b (linear in degrees).
inline LatLon interpolate(LatLon a, LatLon b, double fraction) {
  return {a.lat + (b.lat - a.lat) * fraction, a.lon + (b.lon - a.lon) * fraction};
}

}  // namespace fleet::geo
