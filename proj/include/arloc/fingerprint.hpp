#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/map_model.hpp"
#include "arloc/types.hpp"

namespace arloc {

inline constexpr double kDefaultRssFloor = -100.0;

struct ClusterConfig {
  int k = 3;
  double rss_floor = kDefaultRssFloor;
  int max_iterations = 50;
  std::uint64_t seed = 42;

  bool operator==(const ClusterConfig&) const = default;

  void validate() const {
    if (k < 1) throw InvalidArgument("cluster count k must be >= 1");
    if (!(rss_floor < 0.0)) throw InvalidArgument("rss_floor must be negative");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  }
};

/// Aligns two fingerprints over the sorted union of their AP ids.
///
/// APs missing from one side read as `floor`; every entry is then shifted to
/// `rss - floor` and clamped at zero, so both vectors are non-negative.
inline std::pair<std::vector<double>, std::vector<double>> align(const Fingerprint& a, const Fingerprint& b,
                                                                 double floor = kDefaultRssFloor) {
  std::vector<double> va;
  std::vector<double> vb;
  va.reserve(a.readings.size() + b.readings.size());
  vb.reserve(a.readings.size() + b.readings.size());
  const auto shift = [floor](double rss) { return std::max(0.0, rss - floor); };

  auto ia = a.readings.begin();
  auto ib = b.readings.begin();
  while (ia != a.readings.end() || ib != b.readings.end()) {
    if (ib == b.readings.end() || (ia != a.readings.end() && ia->first < ib->first)) {
      va.push_back(shift(ia->second));
      vb.push_back(0.0);
      ++ia;
    } else if (ia == a.readings.end() || ib->first < ia->first) {
      va.push_back(0.0);
      vb.push_back(shift(ib->second));
      ++ib;
    } else {
      va.push_back(shift(ia->second));
      vb.push_back(shift(ib->second));
      ++ia;
      ++ib;
    }
  }
  return {std::move(va), std::move(vb)};
}

inline double cosine_similarity(const Fingerprint& a, const Fingerprint& b, double floor = kDefaultRssFloor) {
  const auto [va, vb] = align(a, b, floor);
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    ab += va[i] * vb[i];
    aa += va[i] * va[i];
    bb += vb[i] * vb[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DegenerateInput("fingerprint has no reading above the RSS floor");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), 0.0, 1.0);
}

inline double cosine_distance(const Fingerprint& a, const Fingerprint& b, double floor = kDefaultRssFloor) {
  return 1.0 - cosine_similarity(a, b, floor);
}

/// Dense symmetric matrix of pairwise cosine distances.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  DistanceMatrix(std::span<const Fingerprint> fps, double floor) : n_(fps.size()), d_(n_ * n_, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double v = cosine_distance(fps[i], fps[j], floor);
        d_[i * n_ + j] = v;
        d_[j * n_ + i] = v;
      }
    }
  }

  // Direct construction from precomputed values (row-major, n x n).
  DistanceMatrix(std::size_t n, std::vector<double> values) : n_(n), d_(std::move(values)) {
    if (d_.size() != n_ * n_) throw InvalidArgument("distance matrix must be n x n");
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// Index of the element with the smallest summed distance to all others.
inline std::size_t medoid(const DistanceMatrix& dist) {
  if (dist.size() == 0) throw InvalidArgument("medoid of an empty set");
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) sum += dist(i, j);
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

inline std::size_t medoid(std::span<const Fingerprint> fps, double floor = kDefaultRssFloor) {
  if (fps.empty()) throw InvalidArgument("medoid of an empty fingerprint list");
  return medoid(DistanceMatrix(fps, floor));
}

struct KMedoidsResult {
  std::vector<std::size_t> medoids;      // point index of each cluster's medoid
  std::vector<std::size_t> labels;       // cluster index per point
  std::vector<double> objective_trace;   // objective after init, then after every accepted swap
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Sum over all points of the distance to their closest medoid.
inline double kmedoids_objective(const DistanceMatrix& dist, std::span<const std::size_t> medoids) {
  double total = 0.0;
  for (std::size_t p = 0; p < dist.size(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : medoids) best = std::min(best, dist(p, m));
    total += best;
  }
  return total;
}

}  // namespace detail

/// PAM-style K-medoids.
///
/// Initialisation: the first medoid is drawn from `seed`, the remaining k-1
/// are added greedily, each time picking the point that lowers the objective
/// the most. Then the best (medoid, non-medoid) swap is applied per iteration
/// until no swap improves the objective or `max_iterations` is reached.
/// Clusters are finally renumbered by their lowest member index.
inline KMedoidsResult k_medoids(const DistanceMatrix& dist, int k, int max_iterations, std::uint64_t seed) {
  const std::size_t n = dist.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) throw InvalidArgument("k must lie in [1, number of points]");
  const auto kk = static_cast<std::size_t>(k);

  KMedoidsResult result;
  std::vector<std::size_t>& medoids = result.medoids;
  std::vector<bool> is_medoid(n, false);

  std::mt19937_64 rng(seed);
  const std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  medoids.push_back(first);
  is_medoid[first] = true;
  while (medoids.size() < kk) {
    std::size_t best = n;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      medoids.push_back(c);
      const double obj = detail::kmedoids_objective(dist, medoids);
      medoids.pop_back();
      if (obj < best_obj) {
        best_obj = obj;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
  }

  double current = detail::kmedoids_objective(dist, medoids);
  result.objective_trace.push_back(current);

  // Improvements smaller than this are treated as ties to avoid cycling on rounding noise.
  constexpr double kMinGain = 1e-12;
  while (result.iterations < max_iterations) {
    std::size_t swap_slot = kk;
    std::size_t swap_in = n;
    double best_obj = current;
    for (std::size_t slot = 0; slot < kk; ++slot) {
      const std::size_t out = medoids[slot];
      for (std::size_t c = 0; c < n; ++c) {
        if (is_medoid[c]) continue;
        medoids[slot] = c;
        const double obj = detail::kmedoids_objective(dist, medoids);
        if (obj < best_obj - kMinGain) {
          best_obj = obj;
          swap_slot = slot;
          swap_in = c;
        }
      }
      medoids[slot] = out;
    }
    ++result.iterations;
    if (swap_slot == kk) {
      result.converged = true;
      break;
    }
    is_medoid[medoids[swap_slot]] = false;
    is_medoid[swap_in] = true;
    medoids[swap_slot] = swap_in;
    current = best_obj;
    result.objective_trace.push_back(current);
  }

  // Assign, ties to the medoid with the lower point index.
  std::vector<std::size_t> raw_labels(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t best_slot = 0;
    for (std::size_t slot = 1; slot < kk; ++slot) {
      const double d = dist(p, medoids[slot]);
      const double b = dist(p, medoids[best_slot]);
      if (d < b || (d == b && medoids[slot] < medoids[best_slot])) best_slot = slot;
    }
    raw_labels[p] = best_slot;
  }

  // Canonical cluster order: by first member index.
  std::vector<std::size_t> remap(kk, kk);
  std::size_t next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (remap[raw_labels[p]] == kk) remap[raw_labels[p]] = next++;
  }
  // A medoid always belongs to its own cluster, so every slot was seen.
  std::vector<std::size_t> ordered(kk);
  for (std::size_t slot = 0; slot < kk; ++slot) ordered[remap[slot]] = medoids[slot];
  medoids = std::move(ordered);
  result.labels.resize(n);
  for (std::size_t p = 0; p < n; ++p) result.labels[p] = remap[raw_labels[p]];
  return result;
}

/// Per-RP central fingerprint: the medoid of the fingerprints stored at each RP,
/// in map order.
inline std::vector<Fingerprint> rp_medoid_fingerprints(const IndoorMap& map, double floor = kDefaultRssFloor) {
  std::vector<Fingerprint> out;
  out.reserve(map.rps.size());
  for (const auto& rp : map.rps) {
    if (rp.fingerprints.empty())
      throw InvalidArgument("RP " + std::to_string(rp.id) + " has no fingerprints");
    out.push_back(rp.fingerprints[medoid(rp.fingerprints, floor)]);
  }
  return out;
}

struct SubareaClustering {
  std::vector<Subarea> subareas;
  std::vector<Fingerprint> rp_medoids;  // parallel to map.rps
  KMedoidsResult kmedoids;
};

/// Two-step clustering: per-RP medoid fingerprints, then K-medoids over those
/// medoids with cosine distance.
inline SubareaClustering cluster_subareas(const IndoorMap& map, const ClusterConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(cfg.k) > map.rps.size())
    throw InvalidArgument("k = " + std::to_string(cfg.k) + " exceeds the number of RPs (" +
                          std::to_string(map.rps.size()) + ")");
  SubareaClustering out;
  out.rp_medoids = rp_medoid_fingerprints(map, cfg.rss_floor);
  const DistanceMatrix dist(out.rp_medoids, cfg.rss_floor);
  out.kmedoids = k_medoids(dist, cfg.k, cfg.max_iterations, cfg.seed);

  out.subareas.resize(static_cast<std::size_t>(cfg.k));
  for (std::size_t c = 0; c < out.subareas.size(); ++c) {
    out.subareas[c].id = static_cast<int>(c);
    out.subareas[c].centroid = out.rp_medoids[out.kmedoids.medoids[c]];
  }
  for (std::size_t p = 0; p < map.rps.size(); ++p) {
    out.subareas[out.kmedoids.labels[p]].member_rp_ids.push_back(map.rps[p].id);
  }
  return out;
}

inline std::vector<Subarea> build_subareas(const IndoorMap& map, const ClusterConfig& cfg) {
  return cluster_subareas(map, cfg).subareas;
}

/// Subarea whose centroid is most cosine-similar to `fp`; ties to the lowest id.
inline const Subarea& locate_subarea(const Fingerprint& fp, std::span<const Subarea> subareas,
                                     double floor = kDefaultRssFloor) {
  if (subareas.empty()) throw InvalidArgument("no subareas to locate against");
  const Subarea* best = nullptr;
  double best_sim = -1.0;
  for (const auto& s : subareas) {
    const double sim = cosine_similarity(fp, s.centroid, floor);
    if (best == nullptr || sim > best_sim || (sim == best_sim && s.id < best->id)) {
      best = &s;
      best_sim = sim;
    }
  }
  return *best;
}

}  // namespace arloc
