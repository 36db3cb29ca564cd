#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/geometry.hpp"
#include "arloc/map_model.hpp"
#include "arloc/pose.hpp"
#include "arloc/positioning.hpp"
#include "arloc/types.hpp"

namespace arloc {

inline constexpr double kFrameWidth = 800.0;
inline constexpr double kFrameHeight = 600.0;

struct SynthConfig {
  std::uint64_t seed = 42;
  int num_aps = 8;
  double tx_power_p0 = -40.0;  // dBm at 1 m
  double path_loss_gamma = 2.5;
  double rss_noise_sigma = 3.0;
  int landmarks_per_object = 12;
  double keypoint_jitter_px = 1.0;
  double descriptor_noise = 0.05;
  int headings_per_rp = 8;
  int fingerprints_per_rp = 50;
  int images_per_rp = 50;
  std::map<std::string, double> device_rss_offsets{{"phone_a", 0.0}, {"phone_b", -4.0}, {"phone_c", 3.0}};

  // World layout.
  int num_objects = 12;
  int object_designs = 12;     // objects cycle through designs; equal designs look alike
  double object_inset = 0.75;  // booths stand this far outside the RP area
  double wall_margin = 1.5;    // walls stand this far outside the RP area
  int wall_landmarks = 200;
  double min_signature_separation = 0.8;
  double landmark_size_min = 0.02;  // metres; physical feature size range
  double landmark_size_max = 0.08;
  double min_keypoint_px = 8.0;     // features projecting smaller than this are not detected
  double view_yaw_noise = 3.0;      // degrees; hand-held yaw error of every captured view
  double stored_yaw_spread = 0.0;   // fraction of a heading sector the stored views fan out over
  double trial_position_jitter = 0.25;  // max per-axis trial offset from its RP, in grid intervals

  bool operator==(const SynthConfig&) const = default;

  void validate() const {
    if (num_aps < 1 || landmarks_per_object < 1 || headings_per_rp < 1 || fingerprints_per_rp < 1 ||
        images_per_rp < 1 || num_objects < 1 || object_designs < 1 || wall_landmarks < 0)
      throw InvalidArgument("synthetic counts must be positive");
    if (!(rss_noise_sigma >= 0.0) || !(keypoint_jitter_px >= 0.0) || !(descriptor_noise >= 0.0))
      throw InvalidArgument("noise levels must be non-negative");
    if (!(path_loss_gamma > 0.0) || !(wall_margin >= 0.0) || !(object_inset >= 0.0) || !(landmark_size_min > 0.0) ||
        landmark_size_max < landmark_size_min || !(min_keypoint_px >= 0.0) || !(view_yaw_noise >= 0.0) ||
        !(stored_yaw_spread >= 0.0 && stored_yaw_spread <= 1.0) ||
        !(trial_position_jitter >= 0.0 && trial_position_jitter <= 0.5))
      throw InvalidArgument("invalid synthetic geometry parameters");
  }

  double device_offset(const std::string& device) const {
    auto it = device_rss_offsets.find(device);
    return it == device_rss_offsets.end() ? 0.0 : it->second;
  }
};

struct AccessPoint {
  std::string id;
  Vec3 position;

  bool operator==(const AccessPoint&) const = default;
};

struct Landmark {
  int id = 0;
  Vec3 world_position;
  double size = 0.05;  // metres
  std::vector<double> signature;

  bool operator==(const Landmark&) const = default;
};

struct SyntheticWorld {
  std::vector<AccessPoint> aps;
  std::vector<Landmark> landmarks;

  bool operator==(const SyntheticWorld&) const = default;
};

/// A populated map together with the world that generated it.
struct SyntheticEnvironment {
  IndoorMap map;
  SyntheticWorld world;
  SynthConfig synth;
  PoseConfig pose;
};

/// Independent RNG stream for (seed, stream, index).
inline std::mt19937_64 sub_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  // splitmix64 finaliser over a simple combination of the three inputs.
  std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ULL) ^ (index * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return std::mt19937_64(z);
}

namespace detail {

inline double gauss(std::mt19937_64& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

enum Stream : std::uint64_t { kWorld = 1, kFingerprints = 2, kImages = 3, kTrials = 4, kPlanted = 5, kSessions = 6 };

}  // namespace detail

/// Log-distance path loss: p0 - 10 * gamma * log10(max(d, 0.1)).
inline double path_loss_rss(double distance_m, double p0, double gamma) {
  return p0 - 10.0 * gamma * std::log10(std::max(distance_m, 0.1));
}

/// One Wi-Fi scan at `position`: path loss per AP plus Gaussian shadowing and
/// a device bias, capped at 0 dBm.
inline Fingerprint synth_fingerprint(const SyntheticWorld& world, const Vec3& position, const SynthConfig& cfg,
                                     double device_offset, std::mt19937_64& rng) {
  Fingerprint fp;
  for (const auto& ap : world.aps) {
    const double rss = path_loss_rss(distance(ap.position, position), cfg.tx_power_p0, cfg.path_loss_gamma) +
                       detail::gauss(rng, cfg.rss_noise_sigma) + device_offset;
    fp.readings[ap.id] = std::min(rss, 0.0);
  }
  return fp;
}

/// Focal length in pixels for the configured horizontal field of view.
inline double focal_length_px(const PoseConfig& pose) {
  return (kFrameWidth / 2.0) / std::tan(deg_to_rad(pose.horizontal_fov) / 2.0);
}

/// Pinhole view of the landmarks from `eye` on an 800x600 frame.
///
/// Landmarks behind the eye or outside the frame are omitted. Pixel positions
/// get Gaussian jitter, descriptors are the landmark signature plus noise.
inline KeypointSet project_view(const EyePose& eye, std::span<const Landmark> landmarks, const SynthConfig& cfg,
                                const PoseConfig& pose, std::mt19937_64& rng) {
  const double focal = focal_length_px(pose);
  KeypointSet out;
  for (const auto& lm : landmarks) {
    const LocalPose l = to_local(eye, lm.world_position);
    if (l.forward <= 1e-6) continue;
    const double u = kFrameWidth / 2.0 + focal * l.right / l.forward;
    const double v = kFrameHeight / 2.0 - focal * l.up / l.forward;
    if (u < 0.0 || u >= kFrameWidth || v < 0.0 || v >= kFrameHeight) continue;
    const double scale_px = lm.size * focal / l.forward;
    if (scale_px < cfg.min_keypoint_px) continue;
    Keypoint kp;
    kp.px = u + detail::gauss(rng, cfg.keypoint_jitter_px);
    kp.py = v + detail::gauss(rng, cfg.keypoint_jitter_px);
    kp.sigma = scale_px;
    kp.descriptor = lm.signature;
    for (double& d : kp.descriptor) d += detail::gauss(rng, cfg.descriptor_noise);
    out.keypoints.push_back(std::move(kp));
  }
  return out;
}

/// Evenly spaced stored viewpoint headings, starting at 0.
inline std::vector<double> stored_headings(int count) {
  std::vector<double> h;
  for (int i = 0; i < count; ++i) h.push_back(360.0 * i / count);
  return h;
}

/// Nominal yaw of stored image `index`: images are dealt round-robin to the
/// heading sectors and spread evenly across each sector's width.
inline double stored_view_yaw(const SynthConfig& cfg, int index) {
  const int sectors = cfg.headings_per_rp;
  const int sector = index % sectors;
  const int slot = index / sectors;
  const int in_sector = cfg.images_per_rp / sectors + (sector < cfg.images_per_rp % sectors ? 1 : 0);
  const double width = 360.0 / sectors;
  return wrap_heading(width * sector + cfg.stored_yaw_spread * width * ((slot + 0.5) / in_sector - 0.5));
}

namespace detail {

// Unit-norm random signatures with a minimum pairwise distance (rejection sampling).
inline std::vector<std::vector<double>> separated_signatures(std::size_t count, double min_sep,
                                                             std::mt19937_64& rng) {
  std::vector<std::vector<double>> out;
  int attempts = 0;
  while (out.size() < count) {
    if (++attempts > 100000) throw InvalidArgument("cannot place well-separated landmark signatures");
    std::vector<double> s(kDefaultDescriptorSize);
    double n2 = 0.0;
    for (double& v : s) {
      v = gauss(rng, 1.0);
      n2 += v * v;
    }
    for (double& v : s) v /= std::sqrt(n2);
    const bool ok = std::ranges::all_of(out, [&](const std::vector<double>& o) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) d2 += (s[i] - o[i]) * (s[i] - o[i]);
      return std::sqrt(d2) >= min_sep;
    });
    if (ok) out.push_back(std::move(s));
  }
  return out;
}

struct WallSpot {
  Vec3 point;   // on the wall, floor level
  Vec3 along;   // unit vector along the wall
  Vec3 inward;  // unit normal pointing into the room
  double room_left;  // how far the wall extends from `point` along -along
  double room_right; // and along +along
};

// Point at arclength s (counter-clockwise from the back-left corner) on the wall rectangle.
inline WallSpot wall_spot(double half_w, double half_d, double s) {
  const double w = 2 * half_w;
  const double d = 2 * half_d;
  if (s < w) return {{-half_w + s, 0, -half_d}, {1, 0, 0}, {0, 0, 1}, s, w - s};
  s -= w;
  if (s < d) return {{half_w, 0, -half_d + s}, {0, 0, 1}, {-1, 0, 0}, s, d - s};
  s -= d;
  if (s < w) return {{half_w - s, 0, half_d}, {-1, 0, 0}, {0, 0, -1}, s, w - s};
  s -= w;
  return {{-half_w, 0, half_d - s}, {0, 0, -1}, {1, 0, 0}, s, d - s};
}

}  // namespace detail

/// Access points, landmarks and virtual objects for a map.
///
/// Booths (the virtual objects) stand on a ring `object_inset` outside the RP
/// area, each carrying `landmarks_per_object` landmarks laid out by its
/// design; booths sharing a design reuse its signatures and layout and so look
/// alike to the image matcher. Walls stand `wall_margin` outside the RP area
/// and carry `wall_landmarks` uniquely textured landmarks.
inline SyntheticWorld gen_world(IndoorMap& map, const SynthConfig& cfg) {
  auto rng = sub_rng(cfg.seed, detail::kWorld);
  SyntheticWorld world;
  const double hw = map.width / 2;
  const double hd = map.depth / 2;
  // Stratified: AP i is uniform inside cell i of a cols x rows partition of
  // the map, so no part of the floor is left without a nearby AP.
  const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(cfg.num_aps * map.width / map.depth))));
  const int rows = (cfg.num_aps + cols - 1) / cols;
  const double cw = map.width / cols;
  const double cd = map.depth / rows;
  for (int i = 0; i < cfg.num_aps; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "ap%02d", i);
    const double x0 = -hw + cw * (i % cols);
    const double z0 = -hd + cd * (i / cols);
    world.aps.push_back(
        {id, map.origin + Vec3{detail::uniform(rng, x0, x0 + cw), 0.0, detail::uniform(rng, z0, z0 + cd)}});
  }

  const auto per_design = static_cast<std::size_t>(cfg.landmarks_per_object);
  const auto designs = static_cast<std::size_t>(cfg.object_designs);
  const auto wall_count = static_cast<std::size_t>(cfg.wall_landmarks);
  const auto signatures =
      detail::separated_signatures(per_design * designs + wall_count, cfg.min_signature_separation, rng);
  const auto size = [&] { return detail::uniform(rng, cfg.landmark_size_min, cfg.landmark_size_max); };

  struct Offset {
    double along, height, depth, size;
  };
  std::vector<Offset> layout;
  for (std::size_t i = 0; i < per_design * designs; ++i) {
    layout.push_back({detail::uniform(rng, -0.45, 0.45), detail::uniform(rng, 0.7, 1.9),
                      detail::uniform(rng, -0.15, 0.15), size()});
  }

  // Every design is used once before any repeats; repeats land on shuffled booths.
  std::vector<std::size_t> design_of(static_cast<std::size_t>(cfg.num_objects));
  for (std::size_t o = 0; o < design_of.size(); ++o) design_of[o] = o % designs;
  std::shuffle(design_of.begin(), design_of.end(), rng);

  int next_landmark = 0;
  const double bhw = hw + cfg.object_inset;
  const double bhd = hd + cfg.object_inset;
  const double ring = 4 * (bhw + bhd);
  for (int o = 0; o < cfg.num_objects; ++o) {
    const auto spot = detail::wall_spot(bhw, bhd, (o + 0.5) * ring / cfg.num_objects);
    const std::size_t design = design_of[static_cast<std::size_t>(o)];
    VirtualObject obj;
    obj.id = o;
    obj.label = "booth-" + std::to_string(o);
    obj.position = map.origin + spot.point + Vec3{0.0, 1.2, 0.0};
    map.objects.push_back(obj);
    for (std::size_t j = 0; j < per_design; ++j) {
      const auto& off = layout[design * per_design + j];
      Landmark lm;
      lm.id = next_landmark++;
      lm.world_position = map.origin + spot.point + std::clamp(off.along, -spot.room_left, spot.room_right) * spot.along +
                          off.depth * spot.inward + Vec3{0.0, off.height, 0.0};
      lm.size = off.size;
      lm.signature = signatures[design * per_design + j];
      world.landmarks.push_back(std::move(lm));
    }
  }

  const double whw = hw + cfg.wall_margin;
  const double whd = hd + cfg.wall_margin;
  const double perimeter = 4 * (whw + whd);
  for (std::size_t i = 0; i < wall_count; ++i) {
    const auto spot = detail::wall_spot(whw, whd, detail::uniform(rng, 0.0, perimeter));
    Landmark lm;
    lm.id = next_landmark++;
    lm.world_position = map.origin + spot.point + Vec3{0.0, detail::uniform(rng, 0.3, 2.6), 0.0};
    lm.size = size();
    lm.signature = signatures[per_design * designs + i];
    world.landmarks.push_back(std::move(lm));
  }
  return world;
}

/// Grid map populated with synthetic fingerprints and keypoint sets at every RP.
inline SyntheticEnvironment gen_environment(double width, double depth, double interval, const SynthConfig& cfg,
                                            const PoseConfig& pose = {}) {
  cfg.validate();
  pose.validate();
  SyntheticEnvironment env;
  env.synth = cfg;
  env.pose = pose;
  env.map = make_grid_map(width, depth, interval);
  env.world = gen_world(env.map, cfg);

  const auto headings = stored_headings(cfg.headings_per_rp);
  for (auto& rp : env.map.rps) {
    auto fp_rng = sub_rng(cfg.seed, detail::kFingerprints, static_cast<std::uint64_t>(rp.id));
    for (int i = 0; i < cfg.fingerprints_per_rp; ++i) {
      rp.fingerprints.push_back(synth_fingerprint(env.world, rp.position, cfg, 0.0, fp_rng));
    }
    auto img_rng = sub_rng(cfg.seed, detail::kImages, static_cast<std::uint64_t>(rp.id));
    for (int i = 0; i < cfg.images_per_rp; ++i) {
      const double heading = wrap_heading(stored_view_yaw(cfg, i) + detail::gauss(img_rng, cfg.view_yaw_noise));
      KeypointSet view = project_view(eye_pose(rp.position, heading, pose), env.world.landmarks, cfg, pose, img_rng);
      view.source_rp_id = rp.id;
      view.source_heading = heading;
      rp.images.push_back(std::move(view));
      rp.viewpoint_headings.push_back(heading);
    }
  }
  return env;
}

/// Fresh observation (fingerprint + image) at an arbitrary pose.
inline Query synth_query(const SyntheticEnvironment& env, const Vec3& position, double heading,
                         const std::string& device_id, std::mt19937_64& rng) {
  Query q;
  q.heading = wrap_heading(heading);
  q.device_id = device_id;
  q.fingerprint = synth_fingerprint(env.world, position, env.synth, env.synth.device_offset(device_id), rng);
  q.keypoints = project_view(eye_pose(position, q.heading, env.pose), env.world.landmarks, env.synth, env.pose, rng);
  return q;
}

/// The first `count` device names: phone_a, phone_b, ...
inline std::vector<std::string> default_devices(int count) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) {
    std::string name = "phone_";
    if (i < 26) {
      name += static_cast<char>('a' + i);
    } else {
      name += std::to_string(i);
    }
    out.push_back(std::move(name));
  }
  return out;
}

/// Seeded trial set. Each trial draws an RP and one of its stored viewpoints,
/// offsets the position uniformly by up to `trial_position_jitter` intervals
/// per axis (by default a half-cell square around the RP) and synthesizes a
/// fresh observation there. Devices are assigned round-robin.
inline std::vector<Trial> gen_trials(const SyntheticEnvironment& env, int num_trials,
                                     std::span<const std::string> devices, std::uint64_t seed) {
  if (num_trials < 0) throw InvalidArgument("num_trials must be non-negative");
  if (env.map.rps.empty()) throw InvalidState("environment has no reference points");
  const double reach = env.map.interval * env.synth.trial_position_jitter;
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(num_trials));
  for (int t = 0; t < num_trials; ++t) {
    auto rng = sub_rng(seed, detail::kTrials, static_cast<std::uint64_t>(t));
    const auto& rp = env.map.rps[std::uniform_int_distribution<std::size_t>(0, env.map.rps.size() - 1)(rng)];
    const int view = std::uniform_int_distribution<int>(0, env.synth.images_per_rp - 1)(rng);
    const double heading = stored_view_yaw(env.synth, view) + detail::gauss(rng, env.synth.view_yaw_noise);
    Vec3 pos = rp.position;
    if (reach > 0.0) pos = pos + Vec3{detail::uniform(rng, -reach, reach), 0.0, detail::uniform(rng, -reach, reach)};
    const std::string device = devices.empty() ? std::string("phone_a") : devices[static_cast<std::size_t>(t) % devices.size()];
    Trial trial;
    trial.query = synth_query(env, pos, heading, device, rng);
    trial.true_rp_id = rp.id;
    trial.true_position = pos;
    trials.push_back(std::move(trial));
  }
  return trials;
}

/// 45-RP grid split into vertical bands, each band dominated by its own APs.
///
/// Used to check that subarea clustering recovers a known partition: every
/// RP hears its band's APs strongly and a few shared APs weakly.
struct PlantedRegimes {
  IndoorMap map;
  std::vector<int> labels;                 // planted band per RP (map order)
  std::vector<Fingerprint> true_prints;    // noise-free fingerprint per RP

  Fingerprint sample(std::size_t rp_index, double sigma, std::mt19937_64& rng) const {
    Fingerprint fp = true_prints[rp_index];
    for (auto& [ap, rss] : fp.readings) rss = std::min(0.0, rss + detail::gauss(rng, sigma));
    return fp;
  }
};

inline PlantedRegimes gen_planted_regimes(int regimes, std::uint64_t seed, int fingerprints_per_rp = 50,
                                          double sigma = 2.0) {
  if (regimes < 1) throw InvalidArgument("regimes must be positive");
  PlantedRegimes out;
  out.map = make_grid_map(4.0, 2.0, 0.5);
  auto rng = sub_rng(seed, detail::kPlanted);
  constexpr int kApsPerRegime = 4;
  constexpr int kSharedAps = 3;
  const double x_min = out.map.rps.front().position.x;
  const double span = out.map.width + out.map.interval;
  for (auto& rp : out.map.rps) {
    const int band = std::min(regimes - 1, static_cast<int>((rp.position.x - x_min + out.map.interval / 2) / span * regimes));
    out.labels.push_back(band);
    Fingerprint fp;
    for (int a = 0; a < kApsPerRegime; ++a) {
      fp.readings["r" + std::to_string(band) + "_ap" + std::to_string(a)] = detail::uniform(rng, -55.0, -40.0);
    }
    for (int a = 0; a < kSharedAps; ++a) fp.readings["shared_ap" + std::to_string(a)] = detail::uniform(rng, -92.0, -85.0);
    out.true_prints.push_back(fp);
  }
  for (std::size_t i = 0; i < out.map.rps.size(); ++i) {
    for (int k = 0; k < fingerprints_per_rp; ++k) out.map.rps[i].fingerprints.push_back(out.sample(i, sigma, rng));
  }
  return out;
}

}  // namespace arloc
