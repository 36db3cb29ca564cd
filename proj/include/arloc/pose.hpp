#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/geometry.hpp"
#include "arloc/map_model.hpp"

namespace arloc {

struct PoseConfig {
  double body_height = 1.6;
  double max_observe_distance = 10.0;
  double horizontal_fov = 60.0;  // degrees
  double aspect_ratio = 16.0 / 9.0;

  bool operator==(const PoseConfig&) const = default;

  void validate() const {
    if (!(body_height > 0.0) || !(max_observe_distance > 0.0) || !(aspect_ratio > 0.0))
      throw InvalidArgument("pose configuration values must be positive");
    if (!(horizontal_fov > 0.0 && horizontal_fov < 180.0)) throw InvalidArgument("horizontal_fov must lie in (0, 180)");
  }
};

// Eye position and horizontal unit facing vector.
struct EyePose {
  Vec3 eye;
  Vec3 facing{0.0, 0.0, 1.0};
};

struct ViewFrustum {
  Vec3 apex;
  Vec3 axis{0.0, 0.0, 1.0};
  double half_angle_h = 0.0;  // radians
  double half_angle_v = 0.0;  // radians
  double max_distance = 0.0;
};

/// Object position in the eye frame L: origin at the eye, forward along f,
/// right = f rotated 90 degrees clockwise seen from above, up = +y.
struct LocalPose {
  double forward = 0.0;
  double right = 0.0;
  double up = 0.0;
  double bearing = 0.0;  // degrees, atan2(right, forward)
  double distance = 0.0;
};

/// Unit facing vector for a heading in degrees clockwise from +z.
inline Vec3 facing_from_heading(double heading_deg) {
  const double t = deg_to_rad(heading_deg);
  return {std::sin(t), 0.0, std::cos(t)};
}

inline EyePose eye_pose(const Vec3& floor_position, double heading_deg, const PoseConfig& cfg = {}) {
  return {floor_position + Vec3{0.0, cfg.body_height, 0.0}, facing_from_heading(heading_deg)};
}

inline EyePose eye_pose(const ReferencePoint& rp, double heading_deg, const PoseConfig& cfg = {}) {
  return eye_pose(rp.position, heading_deg, cfg);
}

inline ViewFrustum build_frustum(const EyePose& pose, const PoseConfig& cfg = {}) {
  ViewFrustum f;
  f.apex = pose.eye;
  f.axis = pose.facing;
  f.half_angle_h = deg_to_rad(cfg.horizontal_fov) / 2.0;
  f.half_angle_v = std::atan(std::tan(f.half_angle_h) / cfg.aspect_ratio);
  f.max_distance = cfg.max_observe_distance;
  return f;
}

inline Vec3 right_axis(const Vec3& facing) { return {facing.z, 0.0, -facing.x}; }

inline LocalPose to_local(const EyePose& pose, const Vec3& world) {
  const Vec3 d = world - pose.eye;
  LocalPose l;
  l.forward = dot(d, pose.facing);
  l.right = dot(d, right_axis(pose.facing));
  l.up = d.y;
  l.bearing = rad_to_deg(std::atan2(l.right, l.forward));
  l.distance = std::sqrt(l.forward * l.forward + l.right * l.right + l.up * l.up);
  return l;
}

inline Vec3 from_local(const EyePose& pose, const LocalPose& local) {
  return pose.eye + local.forward * pose.facing + local.right * right_axis(pose.facing) + Vec3{0.0, local.up, 0.0};
}

inline bool in_frustum(const ViewFrustum& frustum, const LocalPose& l) {
  return l.forward > 0.0 && l.distance <= frustum.max_distance &&
         std::abs(std::atan2(l.right, l.forward)) <= frustum.half_angle_h &&
         std::abs(std::atan2(l.up, l.forward)) <= frustum.half_angle_v;
}

struct VisibleObject {
  VirtualObject object;
  LocalPose local;
};

/// Objects inside the view pyramid, nearest first (ties by object id).
inline std::vector<VisibleObject> visible_objects(const EyePose& pose, const ViewFrustum& frustum,
                                                  std::span<const VirtualObject> objects) {
  std::vector<VisibleObject> out;
  for (const auto& o : objects) {
    const LocalPose l = to_local(pose, o.position);
    if (in_frustum(frustum, l)) out.push_back({o, l});
  }
  std::ranges::sort(out, [](const VisibleObject& a, const VisibleObject& b) {
    if (a.local.distance != b.local.distance) return a.local.distance < b.local.distance;
    return a.object.id < b.object.id;
  });
  return out;
}

}  // namespace arloc
