#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arloc/errors.hpp"
#include "arloc/fingerprint.hpp"
#include "arloc/map_model.hpp"
#include "arloc/pose.hpp"
#include "arloc/positioning.hpp"
#include "arloc/synth.hpp"
#include "arloc/vision.hpp"

namespace arloc {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Everything the CLI and the server persist: the map (with or without built
/// subareas), the configuration it was built with, and optionally the
/// synthetic world it came from so fresh observations can be generated.
struct Database {
  IndoorMap map;
  ClusterConfig cluster;
  MatchConfig match;
  PoseConfig pose;
  std::optional<SyntheticWorld> world;
  std::optional<SynthConfig> synth;

  bool operator==(const Database&) const = default;
};

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw SchemaViolation(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaViolation(std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const json& j, const char* what) {
  if (!j.is_number()) throw SchemaViolation(std::string("'") + what + "' must be a number");
  return j.get<double>();
}

inline int integer(const json& j, const char* what) {
  if (!j.is_number_integer()) throw SchemaViolation(std::string("'") + what + "' must be an integer");
  return j.get<int>();
}

inline const json& array(const json& j, const char* what) {
  if (!j.is_array()) throw SchemaViolation(std::string("'") + what + "' must be an array");
  return j;
}

inline std::string string(const json& j, const char* what) {
  if (!j.is_string()) throw SchemaViolation(std::string("'") + what + "' must be a string");
  return j.get<std::string>();
}

inline double number_field(const json& j, const char* key) { return number(field(j, key), key); }
inline int integer_field(const json& j, const char* key) { return integer(field(j, key), key); }

inline double number_or(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, key);
}

inline int integer_or(const json& j, const char* key, int fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : integer(*it, key);
}

}  // namespace detail

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaViolation("a position must be an array [x, y, z]");
  return {detail::number(j[0], "x"), detail::number(j[1], "y"), detail::number(j[2], "z")};
}

inline json fingerprint_to_json(const Fingerprint& fp) {
  json j = json::object();
  for (const auto& [ap, rss] : fp.readings) j[ap] = rss;
  return j;
}

inline Fingerprint fingerprint_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("a fingerprint must be an object of AP id -> RSS");
  Fingerprint fp;
  for (const auto& [ap, rss] : j.items()) fp.readings[ap] = detail::number(rss, "rss");
  if (!fp.valid()) throw SchemaViolation("fingerprint needs at least one finite RSS reading <= 0 dBm");
  return fp;
}

inline json keypoints_to_json(const KeypointSet& set) {
  json arr = json::array();
  for (const auto& kp : set.keypoints) {
    arr.push_back({{"px", kp.px}, {"py", kp.py}, {"sigma", kp.sigma}, {"descriptor", kp.descriptor}});
  }
  return arr;
}

inline KeypointSet keypoints_from_json(const json& j) {
  KeypointSet set;
  for (const auto& k : detail::array(j, "keypoints")) {
    Keypoint kp;
    kp.px = detail::number_field(k, "px");
    kp.py = detail::number_field(k, "py");
    kp.sigma = detail::number_field(k, "sigma");
    for (const auto& d : detail::array(detail::field(k, "descriptor"), "descriptor"))
      kp.descriptor.push_back(detail::number(d, "descriptor"));
    set.keypoints.push_back(std::move(kp));
  }
  try {
    set.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaViolation(e.what());
  }
  return set;
}

inline json map_to_json(const IndoorMap& map) {
  json rps = json::array();
  for (const auto& rp : map.rps) {
    json fps = json::array();
    for (const auto& fp : rp.fingerprints) fps.push_back(fingerprint_to_json(fp));
    json images = json::array();
    for (std::size_t i = 0; i < rp.images.size(); ++i) {
      images.push_back({{"heading", rp.viewpoint_headings[i]}, {"keypoints", keypoints_to_json(rp.images[i])}});
    }
    rps.push_back({{"id", rp.id}, {"position", vec3_to_json(rp.position)}, {"fingerprints", std::move(fps)},
                   {"images", std::move(images)}});
  }
  json subareas = json::array();
  for (const auto& s : map.subareas) {
    subareas.push_back(
        {{"id", s.id}, {"centroid", fingerprint_to_json(s.centroid)}, {"member_rp_ids", s.member_rp_ids}});
  }
  json objects = json::array();
  for (const auto& o : map.objects) {
    objects.push_back({{"id", o.id}, {"label", o.label}, {"position", vec3_to_json(o.position)}});
  }
  return {{"width", map.width},   {"depth", map.depth}, {"interval", map.interval},
          {"origin", vec3_to_json(map.origin)}, {"rps", std::move(rps)},  {"subareas", std::move(subareas)},
          {"objects", std::move(objects)}};
}

inline IndoorMap map_from_json(const json& j) {
  IndoorMap map;
  map.width = detail::number_field(j, "width");
  map.depth = detail::number_field(j, "depth");
  map.interval = detail::number_field(j, "interval");
  if (auto it = j.find("origin"); it != j.end()) map.origin = vec3_from_json(*it);
  for (const auto& r : detail::array(detail::field(j, "rps"), "rps")) {
    ReferencePoint rp;
    rp.id = detail::integer_field(r, "id");
    rp.position = vec3_from_json(detail::field(r, "position"));
    for (const auto& fp : detail::array(detail::field(r, "fingerprints"), "fingerprints"))
      rp.fingerprints.push_back(fingerprint_from_json(fp));
    for (const auto& img : detail::array(detail::field(r, "images"), "images")) {
      const double heading = detail::number_field(img, "heading");
      KeypointSet set = keypoints_from_json(detail::field(img, "keypoints"));
      set.source_rp_id = rp.id;
      set.source_heading = heading;
      rp.images.push_back(std::move(set));
      rp.viewpoint_headings.push_back(heading);
    }
    map.rps.push_back(std::move(rp));
  }
  if (auto it = j.find("subareas"); it != j.end()) {
    for (const auto& s : detail::array(*it, "subareas")) {
      Subarea sub;
      sub.id = detail::integer_field(s, "id");
      sub.centroid = fingerprint_from_json(detail::field(s, "centroid"));
      for (const auto& id : detail::array(detail::field(s, "member_rp_ids"), "member_rp_ids"))
        sub.member_rp_ids.push_back(detail::integer(id, "member_rp_ids"));
      map.subareas.push_back(std::move(sub));
    }
  }
  if (auto it = j.find("objects"); it != j.end()) {
    for (const auto& o : detail::array(*it, "objects")) {
      map.objects.push_back({detail::integer_field(o, "id"), detail::string(detail::field(o, "label"), "label"),
                             vec3_from_json(detail::field(o, "position"))});
    }
  }
  map.validate();
  return map;
}

inline json world_to_json(const SyntheticWorld& world) {
  json aps = json::array();
  for (const auto& ap : world.aps) aps.push_back({{"id", ap.id}, {"position", vec3_to_json(ap.position)}});
  json landmarks = json::array();
  for (const auto& lm : world.landmarks) {
    landmarks.push_back({{"id", lm.id},
                         {"position", vec3_to_json(lm.world_position)},
                         {"size", lm.size},
                         {"signature", lm.signature}});
  }
  return {{"aps", std::move(aps)}, {"landmarks", std::move(landmarks)}};
}

inline SyntheticWorld world_from_json(const json& j) {
  SyntheticWorld world;
  for (const auto& a : detail::array(detail::field(j, "aps"), "aps")) {
    world.aps.push_back({detail::string(detail::field(a, "id"), "id"), vec3_from_json(detail::field(a, "position"))});
  }
  for (const auto& l : detail::array(detail::field(j, "landmarks"), "landmarks")) {
    Landmark lm;
    lm.id = detail::integer_field(l, "id");
    lm.world_position = vec3_from_json(detail::field(l, "position"));
    lm.size = detail::number_field(l, "size");
    for (const auto& v : detail::array(detail::field(l, "signature"), "signature"))
      lm.signature.push_back(detail::number(v, "signature"));
    world.landmarks.push_back(std::move(lm));
  }
  return world;
}

inline json synth_config_to_json(const SynthConfig& c) {
  return {{"seed", c.seed},
          {"num_aps", c.num_aps},
          {"tx_power_p0", c.tx_power_p0},
          {"path_loss_gamma", c.path_loss_gamma},
          {"rss_noise_sigma", c.rss_noise_sigma},
          {"landmarks_per_object", c.landmarks_per_object},
          {"keypoint_jitter_px", c.keypoint_jitter_px},
          {"descriptor_noise", c.descriptor_noise},
          {"headings_per_rp", c.headings_per_rp},
          {"fingerprints_per_rp", c.fingerprints_per_rp},
          {"images_per_rp", c.images_per_rp},
          {"device_rss_offsets", c.device_rss_offsets},
          {"num_objects", c.num_objects},
          {"object_designs", c.object_designs},
          {"object_inset", c.object_inset},
          {"wall_margin", c.wall_margin},
          {"wall_landmarks", c.wall_landmarks},
          {"min_signature_separation", c.min_signature_separation},
          {"landmark_size_min", c.landmark_size_min},
          {"landmark_size_max", c.landmark_size_max},
          {"min_keypoint_px", c.min_keypoint_px},
          {"view_yaw_noise", c.view_yaw_noise},
          {"stored_yaw_spread", c.stored_yaw_spread},
          {"trial_position_jitter", c.trial_position_jitter}};
}

inline SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("synth config must be an object");
  SynthConfig c;
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw SchemaViolation("'seed' must be a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  c.num_aps = detail::integer_or(j, "num_aps", c.num_aps);
  c.tx_power_p0 = detail::number_or(j, "tx_power_p0", c.tx_power_p0);
  c.path_loss_gamma = detail::number_or(j, "path_loss_gamma", c.path_loss_gamma);
  c.rss_noise_sigma = detail::number_or(j, "rss_noise_sigma", c.rss_noise_sigma);
  c.landmarks_per_object = detail::integer_or(j, "landmarks_per_object", c.landmarks_per_object);
  c.keypoint_jitter_px = detail::number_or(j, "keypoint_jitter_px", c.keypoint_jitter_px);
  c.descriptor_noise = detail::number_or(j, "descriptor_noise", c.descriptor_noise);
  c.headings_per_rp = detail::integer_or(j, "headings_per_rp", c.headings_per_rp);
  c.fingerprints_per_rp = detail::integer_or(j, "fingerprints_per_rp", c.fingerprints_per_rp);
  c.images_per_rp = detail::integer_or(j, "images_per_rp", c.images_per_rp);
  if (auto it = j.find("device_rss_offsets"); it != j.end()) {
    if (!it->is_object()) throw SchemaViolation("'device_rss_offsets' must be an object");
    c.device_rss_offsets.clear();
    for (const auto& [dev, off] : it->items()) c.device_rss_offsets[dev] = detail::number(off, "device offset");
  }
  c.num_objects = detail::integer_or(j, "num_objects", c.num_objects);
  c.object_designs = detail::integer_or(j, "object_designs", c.object_designs);
  c.object_inset = detail::number_or(j, "object_inset", c.object_inset);
  c.wall_margin = detail::number_or(j, "wall_margin", c.wall_margin);
  c.wall_landmarks = detail::integer_or(j, "wall_landmarks", c.wall_landmarks);
  c.min_signature_separation = detail::number_or(j, "min_signature_separation", c.min_signature_separation);
  c.landmark_size_min = detail::number_or(j, "landmark_size_min", c.landmark_size_min);
  c.landmark_size_max = detail::number_or(j, "landmark_size_max", c.landmark_size_max);
  c.min_keypoint_px = detail::number_or(j, "min_keypoint_px", c.min_keypoint_px);
  c.view_yaw_noise = detail::number_or(j, "view_yaw_noise", c.view_yaw_noise);
  c.stored_yaw_spread = detail::number_or(j, "stored_yaw_spread", c.stored_yaw_spread);
  c.trial_position_jitter = detail::number_or(j, "trial_position_jitter", c.trial_position_jitter);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaViolation(e.what());
  }
  return c;
}

inline json build_config_to_json(const Database& db) {
  return {{"k", db.cluster.k},
          {"rss_floor", db.cluster.rss_floor},
          {"max_iterations", db.cluster.max_iterations},
          {"cluster_seed", db.cluster.seed},
          {"n_pairs", db.match.n_pairs},
          {"top_m", db.match.top_m},
          {"ratio_threshold", db.match.ratio_threshold},
          {"min_matches", db.match.min_matches},
          {"epsilon", db.match.epsilon},
          {"body_height", db.pose.body_height},
          {"max_observe_distance", db.pose.max_observe_distance},
          {"horizontal_fov", db.pose.horizontal_fov},
          {"aspect_ratio", db.pose.aspect_ratio}};
}

inline void build_config_from_json(const json& j, Database& db) {
  if (!j.is_object()) throw SchemaViolation("'build_config' must be an object");
  db.cluster.k = detail::integer_or(j, "k", db.cluster.k);
  db.cluster.rss_floor = detail::number_or(j, "rss_floor", db.cluster.rss_floor);
  db.cluster.max_iterations = detail::integer_or(j, "max_iterations", db.cluster.max_iterations);
  if (auto it = j.find("cluster_seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw SchemaViolation("'cluster_seed' must be a non-negative integer");
    db.cluster.seed = it->get<std::uint64_t>();
  }
  db.match.n_pairs = detail::integer_or(j, "n_pairs", db.match.n_pairs);
  db.match.top_m = detail::integer_or(j, "top_m", db.match.top_m);
  db.match.ratio_threshold = detail::number_or(j, "ratio_threshold", db.match.ratio_threshold);
  db.match.min_matches = detail::integer_or(j, "min_matches", db.match.min_matches);
  db.match.epsilon = detail::number_or(j, "epsilon", db.match.epsilon);
  db.pose.body_height = detail::number_or(j, "body_height", db.pose.body_height);
  db.pose.max_observe_distance = detail::number_or(j, "max_observe_distance", db.pose.max_observe_distance);
  db.pose.horizontal_fov = detail::number_or(j, "horizontal_fov", db.pose.horizontal_fov);
  db.pose.aspect_ratio = detail::number_or(j, "aspect_ratio", db.pose.aspect_ratio);
  try {
    db.cluster.validate();
    db.match.validate();
    db.pose.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaViolation(e.what());
  }
}

inline json db_to_json(const Database& db) {
  json j = {{"format_version", kFormatVersion},
            {"map", map_to_json(db.map)},
            {"build_config", build_config_to_json(db)}};
  if (db.world) j["world"] = world_to_json(*db.world);
  if (db.synth) j["synth"] = synth_config_to_json(*db.synth);
  return j;
}

inline void check_version(const json& j) {
  const int version = detail::integer_field(j, "format_version");
  if (version != kFormatVersion) throw VersionMismatch(version, kFormatVersion);
}

inline Database db_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("database must be a JSON object");
  check_version(j);
  Database db;
  if (auto it = j.find("build_config"); it != j.end()) build_config_from_json(*it, db);
  db.map = map_from_json(detail::field(j, "map"));
  if (auto it = j.find("world"); it != j.end()) db.world = world_from_json(*it);
  if (auto it = j.find("synth"); it != j.end()) db.synth = synth_config_from_json(*it);
  if (!db.map.subareas.empty() && static_cast<int>(db.map.subareas.size()) != db.cluster.k)
    throw SchemaViolation("subarea count does not match build_config.k");
  return db;
}

inline Database db_from_environment(const SyntheticEnvironment& env) {
  Database db;
  db.map = env.map;
  db.pose = env.pose;
  db.world = env.world;
  db.synth = env.synth;
  return db;
}

inline SyntheticEnvironment environment_from_db(const Database& db) {
  if (!db.world || !db.synth) throw InvalidState("database carries no synthetic world");
  SyntheticEnvironment env;
  env.map = db.map;
  env.world = *db.world;
  env.synth = *db.synth;
  env.pose = db.pose;
  return env;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoFailure("error reading " + path.string());
  return ss.str();
}

// Writes via a sibling temporary file and a rename so readers never see a partial file.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoFailure("error writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoFailure("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation(what + " is not valid JSON: " + e.what());
  }
}

inline json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

inline void save_db(const std::filesystem::path& path, const Database& db) { write_json(path, db_to_json(db)); }

inline Database load_db(const std::filesystem::path& path) {
  try {
    return db_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw SchemaViolation(path.string() + ": " + e.what());
  }
}

inline json query_to_json(const Query& q) {
  return {{"fingerprint", fingerprint_to_json(q.fingerprint)},
          {"keypoints", keypoints_to_json(q.keypoints)},
          {"heading", q.heading},
          {"device_id", q.device_id}};
}

inline Query query_from_json(const json& j) {
  Query q;
  q.fingerprint = fingerprint_from_json(detail::field(j, "fingerprint"));
  q.keypoints = keypoints_from_json(detail::field(j, "keypoints"));
  q.heading = detail::number_field(j, "heading");
  if (!(q.heading >= 0.0 && q.heading < 360.0)) throw SchemaViolation("'heading' must lie in [0, 360)");
  if (auto it = j.find("device_id"); it != j.end()) q.device_id = detail::string(*it, "device_id");
  return q;
}

inline json trials_to_json(std::span<const Trial> trials, std::uint64_t seed) {
  json arr = json::array();
  for (const auto& t : trials) {
    arr.push_back({{"true_rp_id", t.true_rp_id},
                   {"true_position", vec3_to_json(t.true_position)},
                   {"query", query_to_json(t.query)}});
  }
  return {{"format_version", kFormatVersion}, {"seed", seed}, {"trials", std::move(arr)}};
}

struct TrialFile {
  std::uint64_t seed = 0;
  std::vector<Trial> trials;
};

inline TrialFile trials_from_json(const json& j) {
  check_version(j);
  TrialFile out;
  const json& seed = detail::field(j, "seed");
  if (!seed.is_number_unsigned()) throw SchemaViolation("'seed' must be a non-negative integer");
  out.seed = seed.get<std::uint64_t>();
  for (const auto& t : detail::array(detail::field(j, "trials"), "trials")) {
    Trial trial;
    trial.true_rp_id = detail::integer_field(t, "true_rp_id");
    trial.true_position = vec3_from_json(detail::field(t, "true_position"));
    trial.query = query_from_json(detail::field(t, "query"));
    out.trials.push_back(std::move(trial));
  }
  return out;
}

inline json visible_to_json(std::span<const VisibleObject> visible) {
  json arr = json::array();
  for (const auto& v : visible) {
    arr.push_back({{"id", v.object.id},
                   {"label", v.object.label},
                   {"forward", v.local.forward},
                   {"right", v.local.right},
                   {"up", v.local.up},
                   {"bearing", v.local.bearing},
                   {"distance", v.local.distance}});
  }
  return arr;
}

inline json result_to_json(const LocalizationResult& r) {
  json ranked = json::array();
  for (const auto& e : r.diagnostics.ranked) {
    ranked.push_back({{"rp_id", e.rp_id},
                      {"image_index", e.image_index},
                      {"similarity", e.similarity},
                      {"dr", e.dr ? json(*e.dr) : json(nullptr)}});
  }
  return {{"rp_id", r.rp_id},
          {"subarea_id", r.subarea_id ? json(*r.subarea_id) : json(nullptr)},
          {"position", vec3_to_json(r.position)},
          {"method", std::string(to_string(r.method))},
          {"diagnostics",
           {{"ranked", std::move(ranked)},
            {"selected", r.diagnostics.selected ? json(*r.diagnostics.selected) : json(nullptr)},
            {"fallback", r.diagnostics.fallback}}}};
}

inline json report_to_json(const MetricsReport& report) {
  json methods = json::object();
  for (const auto& m : report.methods) {
    json per_device = json::object();
    for (const auto& [dev, d] : m.per_device) {
      per_device[dev] = {{"matching_rate", d.matching_rate}, {"avg_error_m", d.avg_error_m}, {"n_trials", d.n_trials}};
    }
    methods[std::string(to_string(m.method))] = {{"matching_rate", m.matching_rate},
                                                 {"avg_error_m", m.avg_error_m},
                                                 {"per_device", std::move(per_device)},
                                                 {"n_trials", m.n_trials},
                                                 {"seed", report.seed}};
  }
  return {{"format_version", kFormatVersion}, {"seed", report.seed}, {"methods", std::move(methods)}};
}

/// Fixed-width text table of a report, one row per method.
inline std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %14s %12s %9s\n", "method", "matching_rate", "avg_error_m", "n_trials");
  out << line;
  for (const auto& m : report.methods) {
    std::snprintf(line, sizeof line, "%-12s %14.4f %12.4f %9d\n", std::string(to_string(m.method)).c_str(),
                  m.matching_rate, m.avg_error_m, m.n_trials);
    out << line;
  }
  return out.str();
}

}  // namespace arloc
