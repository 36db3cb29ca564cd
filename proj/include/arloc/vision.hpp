#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/map_model.hpp"
#include "arloc/types.hpp"

namespace arloc {

struct MatchConfig {
  int n_pairs = 10;               // matches used by the distance ratio
  int top_m = 5;                  // retrieval candidates kept for DR selection
  double ratio_threshold = 0.75;  // nearest / second-nearest descriptor distance
  int min_matches = 4;
  double epsilon = 1e-9;          // query pixel distances below this are skipped

  bool operator==(const MatchConfig&) const = default;

  void validate() const {
    if (n_pairs <= 1) throw InvalidArgument("n_pairs must be > 1");
    if (top_m < 1) throw InvalidArgument("top_m must be >= 1");
    if (!(ratio_threshold > 0.0 && ratio_threshold < 1.0)) throw InvalidArgument("ratio_threshold must lie in (0, 1)");
    if (min_matches < 0) throw InvalidArgument("min_matches must be non-negative");
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be non-negative");
  }
};

struct MatchPair {
  Keypoint query_point;
  Keypoint candidate_point;
  double descriptor_distance = 0.0;
};

// Index form of a match; what the retrieval loop works with.
struct IndexMatch {
  std::size_t query_index = 0;
  std::size_t candidate_index = 0;
  double descriptor_distance = 0.0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline void check_descriptor_sizes(const KeypointSet& query, const KeypointSet& candidate) {
  if (query.empty() || candidate.empty()) return;
  const std::size_t d = query.descriptor_size();
  const auto same = [d](const Keypoint& kp) { return kp.descriptor.size() == d; };
  if (!std::ranges::all_of(query.keypoints, same) || !std::ranges::all_of(candidate.keypoints, same))
    throw InvalidArgument("descriptor length mismatch between query and candidate keypoints");
}

}  // namespace detail

/// Ratio-tested, one-to-one nearest-descriptor matching.
///
/// Each query keypoint proposes its nearest candidate (Euclidean descriptor
/// distance). The proposal survives if nearest < ratio_threshold * second
/// nearest, or unconditionally when the candidate holds a single keypoint.
/// Surviving proposals are granted greedily by ascending distance so that no
/// candidate keypoint is used twice. Output is sorted by distance, ties by
/// query index.
inline std::vector<IndexMatch> match_indices(const KeypointSet& query, const KeypointSet& candidate,
                                             const MatchConfig& cfg) {
  detail::check_descriptor_sizes(query, candidate);
  std::vector<IndexMatch> proposals;
  if (query.empty() || candidate.empty()) return proposals;

  const double ratio2 = cfg.ratio_threshold * cfg.ratio_threshold;
  const bool single = candidate.size() == 1;
  proposals.reserve(query.size());
  for (std::size_t qi = 0; qi < query.size(); ++qi) {
    const auto& qd = query.keypoints[qi].descriptor;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t ci = 0; ci < candidate.size(); ++ci) {
      const double d = detail::squared_distance(qd, candidate.keypoints[ci].descriptor);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = ci;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (single || d1 < ratio2 * d2) proposals.push_back({qi, best, std::sqrt(d1)});
  }

  std::ranges::sort(proposals, [](const IndexMatch& a, const IndexMatch& b) {
    if (a.descriptor_distance != b.descriptor_distance) return a.descriptor_distance < b.descriptor_distance;
    return a.query_index < b.query_index;
  });
  std::vector<bool> used(candidate.size(), false);
  std::vector<IndexMatch> out;
  out.reserve(proposals.size());
  for (const auto& m : proposals) {
    if (used[m.candidate_index]) continue;
    used[m.candidate_index] = true;
    out.push_back(m);
  }
  return out;
}

inline std::vector<MatchPair> match_keypoints(const KeypointSet& query, const KeypointSet& candidate,
                                              const MatchConfig& cfg) {
  std::vector<MatchPair> out;
  for (const auto& m : match_indices(query, candidate, cfg)) {
    out.push_back({query.keypoints[m.query_index], candidate.keypoints[m.candidate_index], m.descriptor_distance});
  }
  return out;
}

/// Number of accepted matches between two images.
inline int image_similarity(const KeypointSet& query, const KeypointSet& candidate, const MatchConfig& cfg) {
  return static_cast<int>(match_indices(query, candidate, cfg).size());
}

/// Distance ratio DR(B|A) from pixel positions of matched keypoints, A being the
/// query and B the candidate, both sorted ascending by descriptor distance.
///
///   DR = 1 / (N'(N'-1)) * sum_{n != j} |B_n B_j| / |A_n A_j|
///
/// over the first N' = min(n_pairs, count) matches. Ordered pairs whose query
/// distance is below epsilon are left out of both the sum and the count.
inline double distance_ratio(std::span<const double> ax, std::span<const double> ay, std::span<const double> bx,
                             std::span<const double> by, const MatchConfig& cfg) {
  const std::size_t count = ax.size();
  const auto required = static_cast<std::size_t>(std::max(2, cfg.min_matches));
  if (count < required)
    throw InsufficientMatches("distance ratio needs " + std::to_string(required) + " matches, got " +
                              std::to_string(count));
  const std::size_t used = std::min(count, static_cast<std::size_t>(cfg.n_pairs));
  double sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t n = 0; n < used; ++n) {
    for (std::size_t j = 0; j < used; ++j) {
      if (n == j) continue;
      const double da = std::hypot(ax[n] - ax[j], ay[n] - ay[j]);
      if (da < cfg.epsilon) continue;
      sum += std::hypot(bx[n] - bx[j], by[n] - by[j]) / da;
      ++terms;
    }
  }
  if (terms == 0) throw DegenerateGeometry("all matched query keypoints coincide");
  return sum / static_cast<double>(terms);
}

inline double distance_ratio(std::span<const MatchPair> matches, const MatchConfig& cfg) {
  std::vector<double> ax, ay, bx, by;
  for (const auto& m : matches) {
    ax.push_back(m.query_point.px);
    ay.push_back(m.query_point.py);
    bx.push_back(m.candidate_point.px);
    by.push_back(m.candidate_point.py);
  }
  return distance_ratio(ax, ay, bx, by, cfg);
}

inline double distance_ratio(const KeypointSet& query, const KeypointSet& candidate,
                             std::span<const IndexMatch> matches, const MatchConfig& cfg) {
  std::vector<double> ax, ay, bx, by;
  for (const auto& m : matches) {
    ax.push_back(query.keypoints[m.query_index].px);
    ay.push_back(query.keypoints[m.query_index].py);
    bx.push_back(candidate.keypoints[m.candidate_index].px);
    by.push_back(candidate.keypoints[m.candidate_index].py);
  }
  return distance_ratio(ax, ay, bx, by, cfg);
}

inline double distance_ratio(const KeypointSet& query, const KeypointSet& candidate, const MatchConfig& cfg) {
  return distance_ratio(query, candidate, match_indices(query, candidate, cfg), cfg);
}

struct RankedImage {
  int rp_id = 0;
  int image_index = 0;
  int similarity = 0;
  std::optional<double> dr;  // empty when the matches cannot support a ratio

  bool operator==(const RankedImage&) const = default;
};

/// Top-m stored images by similarity among `rps`, each annotated with its DR.
/// Images with zero similarity are not ranked.
inline std::vector<RankedImage> rank_images(const KeypointSet& query, std::span<const ReferencePoint* const> rps,
                                            const MatchConfig& cfg) {
  struct Scored {
    RankedImage entry;
    const KeypointSet* image;
    std::vector<IndexMatch> matches;
  };
  std::vector<Scored> scored;
  for (const ReferencePoint* rp : rps) {
    for (std::size_t i = 0; i < rp->images.size(); ++i) {
      auto matches = match_indices(query, rp->images[i], cfg);
      if (matches.empty()) continue;
      scored.push_back({{rp->id, static_cast<int>(i), static_cast<int>(matches.size()), std::nullopt},
                        &rp->images[i],
                        std::move(matches)});
    }
  }
  const auto keep = std::min(scored.size(), static_cast<std::size_t>(cfg.top_m));
  std::ranges::partial_sort(scored, scored.begin() + static_cast<std::ptrdiff_t>(keep),
                            [](const Scored& a, const Scored& b) {
                              if (a.entry.similarity != b.entry.similarity)
                                return a.entry.similarity > b.entry.similarity;
                              if (a.entry.rp_id != b.entry.rp_id) return a.entry.rp_id < b.entry.rp_id;
                              return a.entry.image_index < b.entry.image_index;
                            });
  std::vector<RankedImage> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    auto& s = scored[i];
    try {
      s.entry.dr = distance_ratio(query, *s.image, s.matches, cfg);
    } catch (const InsufficientMatches&) {
    } catch (const DegenerateGeometry&) {
    }
    out.push_back(s.entry);
  }
  return out;
}

inline std::vector<RankedImage> rank_images(const KeypointSet& query, std::span<const ReferencePoint> rps,
                                            const MatchConfig& cfg) {
  std::vector<const ReferencePoint*> ptrs;
  ptrs.reserve(rps.size());
  for (const auto& rp : rps) ptrs.push_back(&rp);
  return rank_images(query, std::span<const ReferencePoint* const>(ptrs), cfg);
}

/// Position in `ranked` of the entry chosen by distance compensation: the valid
/// DR closest to 1 in log space (|ln DR|), ties to the lower rp_id. Without any
/// valid DR the first (highest similarity) entry is chosen.
inline std::size_t select_index(std::span<const RankedImage> ranked) {
  if (ranked.empty()) throw NoCandidate("no ranked images to select from");
  // |ln 0.5| and |ln 2| may differ in the last bit; treat them as equal.
  constexpr double kTieTolerance = 1e-12;
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!ranked[i].dr || !(*ranked[i].dr > 0.0)) continue;
    const double score = std::abs(std::log(*ranked[i].dr));
    if (!best || score < best_score - kTieTolerance ||
        (std::abs(score - best_score) <= kTieTolerance && ranked[i].rp_id < ranked[*best].rp_id)) {
      best = i;
      best_score = score;
    }
  }
  if (best) return *best;
  std::size_t top = 0;
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    if (ranked[i].similarity > ranked[top].similarity ||
        (ranked[i].similarity == ranked[top].similarity && ranked[i].rp_id < ranked[top].rp_id))
      top = i;
  }
  return top;
}

inline int select_rp(std::span<const RankedImage> ranked, const MatchConfig& = {}) {
  return ranked[select_index(ranked)].rp_id;
}

}  // namespace arloc
