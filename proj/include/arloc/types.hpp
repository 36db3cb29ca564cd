#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arloc/errors.hpp"

namespace arloc {

/// RSS readings in dBm keyed by an opaque access-point identifier.
///
/// Readings are kept in a sorted map so that two fingerprints can be aligned
/// over the sorted union of their AP sets by a linear merge.
struct Fingerprint {
  std::map<std::string, double> readings;

  bool operator==(const Fingerprint&) const = default;

  // At least one reading, every value finite and not above 0 dBm.
  bool valid() const {
    if (readings.empty()) return false;
    for (const auto& [ap, rss] : readings) {
      if (!std::isfinite(rss) || rss > 0.0) return false;
    }
    return true;
  }

  void validate() const {
    if (!valid()) throw InvalidArgument("fingerprint must hold at least one finite RSS reading <= 0 dBm");
  }
};

inline constexpr std::size_t kDefaultDescriptorSize = 16;

struct Keypoint {
  double px = 0.0;
  double py = 0.0;
  double sigma = 1.0;
  std::vector<double> descriptor;

  bool operator==(const Keypoint&) const = default;
};

/// Keypoints detected in (or synthesized for) one image.
struct KeypointSet {
  std::vector<Keypoint> keypoints;
  std::optional<int> source_rp_id;
  std::optional<double> source_heading;

  bool operator==(const KeypointSet&) const = default;

  std::size_t size() const noexcept { return keypoints.size(); }
  bool empty() const noexcept { return keypoints.empty(); }

  // Descriptor length shared by all keypoints; 0 for an empty set.
  std::size_t descriptor_size() const noexcept {
    return keypoints.empty() ? 0 : keypoints.front().descriptor.size();
  }

  void validate() const {
    const std::size_t d = descriptor_size();
    for (const auto& kp : keypoints) {
      if (kp.descriptor.size() != d) throw InvalidArgument("descriptor length differs within one keypoint set");
      if (!(kp.sigma > 0.0)) throw InvalidArgument("keypoint sigma must be positive");
      if (!std::isfinite(kp.px) || !std::isfinite(kp.py)) throw InvalidArgument("keypoint position must be finite");
    }
  }
};

}  // namespace arloc
