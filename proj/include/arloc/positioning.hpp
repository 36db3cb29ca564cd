#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/fingerprint.hpp"
#include "arloc/map_model.hpp"
#include "arloc/vision.hpp"

namespace arloc {

enum class Method { kWifiOnly, kImageOnly, kCombined, kCombinedDr };

inline constexpr std::array<Method, 4> kAllMethods = {Method::kWifiOnly, Method::kImageOnly, Method::kCombined,
                                                      Method::kCombinedDr};

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::kWifiOnly:
      return "wifi_only";
    case Method::kImageOnly:
      return "image_only";
    case Method::kCombined:
      return "combined";
    case Method::kCombinedDr:
      return "combined_dr";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

// Accepts "all" or a comma-separated list of method names.
inline std::vector<Method> parse_methods(std::string_view s) {
  if (s == "all") return {kAllMethods.begin(), kAllMethods.end()};
  std::vector<Method> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto token = s.substr(0, comma);
    if (!token.empty()) {
      const Method m = parse_method(token);
      if (std::ranges::find(out, m) == out.end()) out.push_back(m);
    }
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) throw InvalidArgument("no methods given");
  return out;
}

struct Query {
  Fingerprint fingerprint;
  KeypointSet keypoints;
  double heading = 0.0;  // degrees clockwise from +z, in [0, 360)
  std::string device_id;

  void validate() const {
    fingerprint.validate();
    keypoints.validate();
    if (!(heading >= 0.0 && heading < 360.0)) throw InvalidArgument("heading must lie in [0, 360)");
  }
};

struct Diagnostics {
  std::vector<RankedImage> ranked;
  std::optional<std::size_t> selected;  // index into ranked
  bool fallback = false;
};

struct LocalizationResult {
  int rp_id = 0;
  std::optional<int> subarea_id;
  Vec3 position;
  Method method = Method::kCombinedDr;
  Diagnostics diagnostics;
};

/// Two-stage localizer over an immutable map with built subareas.
///
/// Per-RP medoid fingerprints are computed once at construction; localize()
/// is const and safe to call concurrently.
class Localizer {
 public:
  Localizer(const IndoorMap& map, ClusterConfig cluster, MatchConfig match)
      : map_(&map), cluster_(cluster), match_(match) {
    cluster_.validate();
    match_.validate();
    if (map.rps.empty()) throw InvalidState("map has no reference points");
    rp_medoids_ = rp_medoid_fingerprints(map, cluster_.rss_floor);
    all_rps_.reserve(map.rps.size());
    for (const auto& rp : map.rps) all_rps_.push_back(&rp);
  }

  const IndoorMap& map() const noexcept { return *map_; }
  const ClusterConfig& cluster_config() const noexcept { return cluster_; }
  const MatchConfig& match_config() const noexcept { return match_; }
  std::span<const Fingerprint> rp_medoids() const noexcept { return rp_medoids_; }

  LocalizationResult localize(const Query& query, Method method) const {
    switch (method) {
      case Method::kWifiOnly:
        return wifi_only(query);
      case Method::kImageOnly:
        return image_stage(query, all_rps_, std::nullopt, method);
      case Method::kCombined:
      case Method::kCombinedDr: {
        if (map_->subareas.empty()) throw InvalidState("combined methods need built subareas");
        const Subarea& s = locate_subarea(query.fingerprint, map_->subareas, cluster_.rss_floor);
        std::vector<const ReferencePoint*> members;
        members.reserve(s.member_rp_ids.size());
        for (int id : s.member_rp_ids) members.push_back(&map_->rp(id));
        return image_stage(query, members, s.id, method);
      }
    }
    throw InvalidArgument("unknown method");
  }

 private:
  // RP whose medoid fingerprint is most similar; ties to the lower id.
  LocalizationResult wifi_only(const Query& query) const {
    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t i = 0; i < rp_medoids_.size(); ++i) {
      const double sim = cosine_similarity(query.fingerprint, rp_medoids_[i], cluster_.rss_floor);
      if (sim > best_sim || (sim == best_sim && map_->rps[i].id < map_->rps[best].id)) {
        best = i;
        best_sim = sim;
      }
    }
    LocalizationResult r;
    r.rp_id = map_->rps[best].id;
    r.position = map_->rps[best].position;
    r.method = Method::kWifiOnly;
    r.subarea_id = subarea_of(r.rp_id);
    return r;
  }

  LocalizationResult image_stage(const Query& query, std::span<const ReferencePoint* const> candidates,
                                 std::optional<int> subarea_id, Method method) const {
    auto ranked = rank_images(query.keypoints, candidates, match_);
    if (ranked.empty()) {
      LocalizationResult r = wifi_only(query);
      r.method = method;
      r.diagnostics.fallback = true;
      return r;
    }
    const std::size_t pick = method == Method::kCombinedDr ? select_index(ranked) : 0;
    LocalizationResult r;
    r.rp_id = ranked[pick].rp_id;
    r.position = map_->rp(r.rp_id).position;
    r.method = method;
    r.subarea_id = subarea_id ? subarea_id : subarea_of(r.rp_id);
    r.diagnostics.ranked = std::move(ranked);
    r.diagnostics.selected = pick;
    return r;
  }

  std::optional<int> subarea_of(int rp_id) const {
    for (const auto& s : map_->subareas) {
      if (std::ranges::find(s.member_rp_ids, rp_id) != s.member_rp_ids.end()) return s.id;
    }
    return std::nullopt;
  }

  const IndoorMap* map_;
  ClusterConfig cluster_;
  MatchConfig match_;
  std::vector<Fingerprint> rp_medoids_;
  std::vector<const ReferencePoint*> all_rps_;
};

inline LocalizationResult localize(const Query& query, const IndoorMap& map, const ClusterConfig& cluster,
                                   const MatchConfig& match, Method method) {
  return Localizer(map, cluster, match).localize(query, method);
}

struct Trial {
  Query query;
  int true_rp_id = 0;
  Vec3 true_position;  // where the observation was synthesized
};

struct DeviceMetrics {
  double matching_rate = 0.0;
  double avg_error_m = 0.0;
  int n_trials = 0;
};

struct MethodMetrics {
  Method method = Method::kCombinedDr;
  double matching_rate = 0.0;
  double avg_error_m = 0.0;
  int n_trials = 0;
  std::map<std::string, DeviceMetrics> per_device;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  std::vector<MethodMetrics> methods;

  const MethodMetrics& at(Method m) const {
    auto it = std::ranges::find(methods, m, &MethodMetrics::method);
    if (it == methods.end()) throw InvalidArgument("method not in report: " + std::string(to_string(m)));
    return *it;
  }
};

namespace detail {

// Runs fn(i) for i in [0, n) over `workers` threads; fn writes only slot i.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace detail

/// Matching rate and mean RP position error per method, with a per-device
/// breakdown. Results do not depend on `workers`.
inline MetricsReport evaluate(std::span<const Trial> trials, const Localizer& localizer,
                              std::span<const Method> methods, std::uint64_t seed = 0,
                              unsigned workers = std::thread::hardware_concurrency()) {
  if (trials.empty()) throw InvalidArgument("evaluate needs at least one trial");
  const IndoorMap& map = localizer.map();
  for (const auto& t : trials) map.rp(t.true_rp_id);

  MetricsReport report;
  report.seed = seed;
  for (Method m : methods) {
    std::vector<int> predicted(trials.size());
    detail::parallel_for(trials.size(), workers,
                         [&](std::size_t i) { predicted[i] = localizer.localize(trials[i].query, m).rp_id; });

    struct Acc {
      int hits = 0;
      double err = 0.0;
      int n = 0;
    };
    Acc total;
    std::map<std::string, Acc> devices;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const bool hit = predicted[i] == trials[i].true_rp_id;
      const double err = distance(map.rp(predicted[i]).position, map.rp(trials[i].true_rp_id).position);
      for (Acc* a : {&total, &devices[trials[i].query.device_id]}) {
        a->hits += hit ? 1 : 0;
        a->err += err;
        a->n += 1;
      }
    }
    MethodMetrics mm;
    mm.method = m;
    mm.n_trials = total.n;
    mm.matching_rate = static_cast<double>(total.hits) / total.n;
    mm.avg_error_m = total.err / total.n;
    for (const auto& [dev, a] : devices) {
      mm.per_device[dev] = {static_cast<double>(a.hits) / a.n, a.err / a.n, a.n};
    }
    report.methods.push_back(std::move(mm));
  }
  return report;
}

}  // namespace arloc
