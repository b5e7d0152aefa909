#pragma once

// Independent point-in-region oracle for tag maps. Each (sector, band)
// region is tested on its own: angular membership by the signs of cross
// products against the two boundary rays, radial membership by comparing
// squared radii. No atan2, no modular sector arithmetic.

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "emomap/wheel.hpp"

namespace emomap::testkit {

struct Ray {
  double x, y;
};

/// Unit vector at a clockwise-from-top angle.
inline Ray ray_at(double clockwise_deg) {
  double a = clockwise_deg * std::numbers::pi / 180.0;
  return {std::sin(a), std::cos(a)};
}

inline double cross(Ray u, double px, double py) { return u.x * py - u.y * px; }

/// Perpendicular distance from (px, py) to the infinite line through the
/// origin along `u`.
inline double line_distance(Ray u, double px, double py) { return std::fabs(cross(u, px, py)); }

/// Sector s spans clockwise angles [c - w/2, c + w/2) with c = offset + s*w.
/// Valid for maps with sector width below 180 degrees.
inline bool in_sector(const TagMap& map, int s, double px, double py) {
  const double w = 360.0 / map.sector_count;
  const double c = map.sector_offset_deg + s * w;
  Ray start = ray_at(c - w / 2), end = ray_at(c + w / 2);
  // p clockwise of start (or on it) and strictly counterclockwise of end
  return cross(start, px, py) <= 0.0 && cross(end, px, py) > 0.0;
}

inline bool in_band(const TagMap& map, int b, double px, double py) {
  const double r2 = px * px + py * py;
  const double inner = b == 0 ? 0.0 : map.band_boundaries[b - 1];
  const double outer = b == map.band_count() - 1 ? 1.0 : map.band_boundaries[b];
  return r2 > inner * inner && r2 <= outer * outer;
}

/// Distance to the nearest sector boundary line or band circle.
inline double boundary_distance(const TagMap& map, double px, double py) {
  const double w = 360.0 / map.sector_count;
  double best = 1e300;
  for (int s = 0; s < map.sector_count; ++s)
    best = std::min(best, line_distance(ray_at(map.sector_offset_deg + s * w - w / 2), px, py));
  const double r = std::hypot(px, py);
  for (double b : map.band_boundaries) best = std::min(best, std::fabs(r - b));
  return best;
}

/// All (sector, band) regions that contain the point.
inline std::vector<std::pair<int, int>> containing_regions(const TagMap& map, double px, double py) {
  std::vector<std::pair<int, int>> hits;
  for (int s = 0; s < map.sector_count; ++s)
    for (int b = 0; b < map.band_count(); ++b)
      if (in_sector(map, s, px, py) && in_band(map, b, px, py)) hits.emplace_back(s, b);
  return hits;
}

} // namespace emomap::testkit
