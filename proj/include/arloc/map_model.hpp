#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/geometry.hpp"
#include "arloc/types.hpp"

namespace arloc {

inline constexpr double kDefaultGridInterval = 0.5;

struct ReferencePoint {
  int id = 0;
  Vec3 position;
  std::vector<Fingerprint> fingerprints;
  std::vector<KeypointSet> images;
  std::vector<double> viewpoint_headings;  // parallel to images

  bool operator==(const ReferencePoint&) const = default;
};

struct Subarea {
  int id = 0;
  Fingerprint centroid;
  std::vector<int> member_rp_ids;

  bool operator==(const Subarea&) const = default;
};

struct VirtualObject {
  int id = 0;
  std::string label;
  Vec3 position;

  bool operator==(const VirtualObject&) const = default;
};

/// Planar RP grid on the x/z plane, centred on the virtual-space origin.
struct IndoorMap {
  double width = 0.0;
  double depth = 0.0;
  double interval = kDefaultGridInterval;
  Vec3 origin;
  double scale_ratio = 1.0;
  std::vector<ReferencePoint> rps;
  std::vector<Subarea> subareas;
  std::vector<VirtualObject> objects;

  bool operator==(const IndoorMap&) const = default;

  const ReferencePoint* find_rp(int id) const {
    auto it = std::ranges::find(rps, id, &ReferencePoint::id);
    return it == rps.end() ? nullptr : &*it;
  }

  const ReferencePoint& rp(int id) const {
    if (const auto* p = find_rp(id)) return *p;
    throw InvalidArgument("unknown RP id " + std::to_string(id));
  }

  const Subarea* find_subarea(int id) const {
    auto it = std::ranges::find(subareas, id, &Subarea::id);
    return it == subareas.end() ? nullptr : &*it;
  }

  bool contains_xz(const Vec3& p, double tol = 1e-9) const {
    return std::abs(p.x - origin.x) <= width / 2 + tol && std::abs(p.z - origin.z) <= depth / 2 + tol;
  }

  // Throws SchemaViolation naming the first broken invariant. Subareas are
  // optional here; require_subareas additionally checks they partition the RPs.
  void validate(bool require_subareas = false) const {
    if (!(width > 0.0) || !(depth > 0.0) || !(interval > 0.0)) throw SchemaViolation("map dimensions must be positive");
    if (scale_ratio != 1.0) throw SchemaViolation("scale_ratio must be 1.0");
    std::set<int> ids;
    for (const auto& rp : rps) {
      if (!ids.insert(rp.id).second) throw SchemaViolation("duplicate RP id " + std::to_string(rp.id));
      if (!contains_xz(rp.position)) throw SchemaViolation("RP " + std::to_string(rp.id) + " outside map bounds");
      if (rp.position.y != 0.0) throw SchemaViolation("RP " + std::to_string(rp.id) + " is not floor level");
      if (rp.images.size() != rp.viewpoint_headings.size())
        throw SchemaViolation("RP " + std::to_string(rp.id) + " has mismatched images/headings");
    }
    std::set<int> object_ids;
    for (const auto& o : objects) {
      if (!object_ids.insert(o.id).second) throw SchemaViolation("duplicate object id " + std::to_string(o.id));
    }
    if (require_subareas && subareas.empty()) throw SchemaViolation("map has no subareas");
    std::set<int> covered;
    std::set<int> subarea_ids;
    for (const auto& s : subareas) {
      if (!subarea_ids.insert(s.id).second) throw SchemaViolation("duplicate subarea id " + std::to_string(s.id));
      if (s.member_rp_ids.empty()) throw SchemaViolation("subarea " + std::to_string(s.id) + " is empty");
      if (!s.centroid.valid()) throw SchemaViolation("subarea " + std::to_string(s.id) + " has an invalid centroid");
      for (int id : s.member_rp_ids) {
        if (!ids.contains(id)) throw SchemaViolation("subarea references unknown RP " + std::to_string(id));
        if (!covered.insert(id).second) throw SchemaViolation("RP " + std::to_string(id) + " in two subareas");
      }
    }
    if (!subareas.empty() && covered.size() != ids.size()) throw SchemaViolation("subareas do not cover every RP");
  }
};

/// Regular grid of RPs at spacing `interval`, centred on the origin.
/// Ids run row-major: z outer (back to front), x inner (left to right).
inline IndoorMap make_grid_map(double width, double depth, double interval = kDefaultGridInterval) {
  if (!(width > 0.0) || !(depth > 0.0)) throw InvalidArgument("map width and depth must be positive");
  if (!(interval > 0.0) || interval > std::min(width, depth))
    throw InvalidArgument("grid interval must lie in (0, min(width, depth)]");

  // Small slack so that exact multiples such as 4.5 / 0.5 are not lost to rounding.
  const auto count = [interval](double extent) {
    return static_cast<int>(std::floor(extent / interval + 1e-9)) + 1;
  };
  const int nx = count(width);
  const int nz = count(depth);

  IndoorMap map;
  map.width = width;
  map.depth = depth;
  map.interval = interval;
  map.rps.reserve(static_cast<std::size_t>(nx * nz));
  const double x0 = -(nx - 1) * interval / 2.0;
  const double z0 = -(nz - 1) * interval / 2.0;
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < nx; ++ix) {
      ReferencePoint rp;
      rp.id = iz * nx + ix;
      rp.position = {x0 + ix * interval, 0.0, z0 + iz * interval};
      map.rps.push_back(std::move(rp));
    }
  }
  return map;
}

/// RP closest to `p` on the floor plane; ties go to the lowest id.
inline const ReferencePoint& nearest_rp(const IndoorMap& map, const Vec3& p) {
  if (map.rps.empty()) throw InvalidState("nearest_rp on a map without reference points");
  const ReferencePoint* best = nullptr;
  double best_d = 0.0;
  for (const auto& rp : map.rps) {
    const double d = distance_xz(rp.position, p);
    if (best == nullptr || d < best_d || (d == best_d && rp.id < best->id)) {
      best = &rp;
      best_d = d;
    }
  }
  return *best;
}

}  // namespace arloc
