#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "arloc/fingerprint.hpp"
#include "arloc/synth.hpp"

using namespace arloc;

namespace {

Fingerprint fp(std::initializer_list<std::pair<const std::string, double>> readings) { return {readings}; }

// Independent cosine over explicitly shifted vectors, for oracle checks.
double naive_cosine(const Fingerprint& a, const Fingerprint& b, double floor = -100.0) {
  std::set<std::string> keys;
  for (const auto& [k, v] : a.readings) keys.insert(k);
  for (const auto& [k, v] : b.readings) keys.insert(k);
  double ab = 0, aa = 0, bb = 0;
  for (const auto& k : keys) {
    const double x = a.readings.contains(k) ? std::max(0.0, a.readings.at(k) - floor) : 0.0;
    const double y = b.readings.contains(k) ? std::max(0.0, b.readings.at(k) - floor) : 0.0;
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  return ab / std::sqrt(aa * bb);
}

Fingerprint random_fp(std::mt19937_64& rng, int aps) {
  std::uniform_real_distribution<double> u(-95.0, -30.0);
  std::bernoulli_distribution heard(0.8);
  Fingerprint f;
  for (int a = 0; a < aps; ++a) {
    if (heard(rng)) f.readings["ap" + std::to_string(a)] = u(rng);
  }
  if (f.readings.empty()) f.readings["ap0"] = u(rng);
  return f;
}

std::set<std::set<int>> partition_of(const std::vector<Subarea>& subareas) {
  std::set<std::set<int>> out;
  for (const auto& s : subareas) out.insert(std::set<int>(s.member_rp_ids.begin(), s.member_rp_ids.end()));
  return out;
}

}  // namespace

TEST(Align, IdenticalSets) {
  const auto [a, b] = align(fp({{"AP1", -50}}), fp({{"AP1", -50}}), -100);
  EXPECT_EQ(a, std::vector<double>{50});
  EXPECT_EQ(b, std::vector<double>{50});
}

TEST(Align, FillsMissingApsAtFloor) {
  const auto [a, b] = align(fp({{"AP1", -50}}), fp({{"AP2", -60}}), -100);
  EXPECT_EQ(a, (std::vector<double>{50, 0}));
  EXPECT_EQ(b, (std::vector<double>{0, 40}));
}

TEST(Align, ShiftsByFloor) {
  const auto [a, b] = align(fp({{"AP1", -50}, {"AP2", -70}}), fp({{"AP1", -90}, {"AP2", -55}}), -100);
  EXPECT_EQ(a, (std::vector<double>{50, 30}));
  EXPECT_EQ(b, (std::vector<double>{10, 45}));
}

TEST(Align, ClampsBelowFloor) {
  const auto [a, b] = align(fp({{"AP1", -120}}), fp({{"AP1", -50}}), -100);
  EXPECT_EQ(a, std::vector<double>{0});
  EXPECT_EQ(b, std::vector<double>{50});
}

TEST(Cosine, HandExample) {
  const double expected = 1850.0 / (std::sqrt(3400.0) * std::sqrt(2125.0));
  const double got = cosine_similarity(fp({{"AP1", -50}, {"AP2", -70}}), fp({{"AP1", -90}, {"AP2", -55}}));
  EXPECT_NEAR(got, expected, 1e-12);
  EXPECT_NEAR(got, 0.68826, 5e-6);
}

TEST(Cosine, IdenticalAndOrthogonal) {
  const auto a = fp({{"AP1", -50}, {"AP2", -63}});
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine_similarity(fp({{"AP1", -50}}), fp({{"AP2", -50}})), 0.0);
}

TEST(Cosine, AllFloorIsDegenerate) {
  EXPECT_THROW(cosine_similarity(fp({{"AP1", -100}}), fp({{"AP1", -50}})), DegenerateInput);
  EXPECT_THROW(cosine_similarity(fp({{"AP1", -50}}), fp({{"AP1", -130}, {"AP2", -100}})), DegenerateInput);
}

TEST(Cosine, SymmetricBoundedAndMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_fp(rng, 6);
    const auto b = random_fp(rng, 6);
    const double ab = cosine_similarity(a, b);
    EXPECT_DOUBLE_EQ(ab, cosine_similarity(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, naive_cosine(a, b), 1e-12);
  }
}

TEST(Medoid, SingleAndEmpty) {
  std::vector<Fingerprint> one{fp({{"a", -40}})};
  EXPECT_EQ(medoid(one), 0u);
  EXPECT_THROW(medoid(std::span<const Fingerprint>{}), InvalidArgument);
}

TEST(Medoid, ParallelVectorsTieToIndexZero) {
  // Shifted vectors (10,0), (20,0), (30,0).
  std::vector<Fingerprint> fps{fp({{"a", -90}, {"b", -100}}), fp({{"a", -80}, {"b", -100}}),
                               fp({{"a", -70}, {"b", -100}})};
  EXPECT_EQ(medoid(fps), 0u);
}

TEST(Medoid, MatchesBruteForce) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 20);
  for (int t = 0; t < 500; ++t) {
    std::vector<Fingerprint> fps;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) fps.push_back(random_fp(rng, 5));
    std::size_t best = 0;
    double best_sum = 1e300;
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int j = 0; j < n; ++j) s += 1.0 - (i == j ? 1.0 : naive_cosine(fps[i], fps[j]));
      if (s < best_sum - 1e-12) {
        best_sum = s;
        best = static_cast<std::size_t>(i);
      }
    }
    EXPECT_EQ(medoid(fps), best) << "case " << t;
  }
}

TEST(KMedoids, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<Fingerprint> fps;
    for (int i = 0; i < 30; ++i) fps.push_back(random_fp(rng, 6));
    const DistanceMatrix d(fps, -100.0);
    const auto r = k_medoids(d, 4, 50, static_cast<std::uint64_t>(t));
    ASSERT_FALSE(r.objective_trace.empty());
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1]);
    }
    EXPECT_NEAR(r.objective_trace.back(), detail::kmedoids_objective(d, r.medoids), 1e-9);
  }
}

TEST(KMedoids, LabelsPointToNearestMedoidAndAreCanonical) {
  std::mt19937_64 rng(9);
  std::vector<Fingerprint> fps;
  for (int i = 0; i < 25; ++i) fps.push_back(random_fp(rng, 6));
  const DistanceMatrix d(fps, -100.0);
  const auto r = k_medoids(d, 3, 50, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.labels[0], 0u);
  std::size_t seen = 0;
  for (std::size_t p = 0; p < fps.size(); ++p) {
    EXPECT_LE(r.labels[p], seen);
    seen = std::max(seen, r.labels[p] + 1);
    for (std::size_t c = 0; c < r.medoids.size(); ++c) {
      EXPECT_LE(d(p, r.medoids[r.labels[p]]), d(p, r.medoids[c]));
    }
  }
  for (std::size_t c = 0; c < r.medoids.size(); ++c) EXPECT_EQ(r.labels[r.medoids[c]], c);
}

TEST(KMedoids, RejectsBadK) {
  const DistanceMatrix d(3, std::vector<double>(9, 0.0));
  EXPECT_THROW(k_medoids(d, 0, 10, 1), InvalidArgument);
  EXPECT_THROW(k_medoids(d, 4, 10, 1), InvalidArgument);
}

TEST(BuildSubareas, KOneAndKAll) {
  const auto planted = gen_planted_regimes(3, 42);
  ClusterConfig cfg;
  cfg.k = 1;
  const auto one = build_subareas(planted.map, cfg);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].member_rp_ids.size(), 45u);

  cfg.k = 45;
  const auto all = build_subareas(planted.map, cfg);
  ASSERT_EQ(all.size(), 45u);
  for (const auto& s : all) EXPECT_EQ(s.member_rp_ids.size(), 1u);

  cfg.k = 46;
  EXPECT_THROW(build_subareas(planted.map, cfg), InvalidArgument);
}

TEST(BuildSubareas, RecoversPlantedRegimes) {
  const auto planted = gen_planted_regimes(3, 42);
  const auto subareas = build_subareas(planted.map, ClusterConfig{});
  std::vector<Subarea> expected(3);
  for (std::size_t i = 0; i < planted.map.rps.size(); ++i)
    expected[static_cast<std::size_t>(planted.labels[i])].member_rp_ids.push_back(planted.map.rps[i].id);
  EXPECT_EQ(partition_of(subareas), partition_of(expected));
}

TEST(BuildSubareas, DeterministicAndCentroidIsMemberMedoid) {
  const auto planted = gen_planted_regimes(3, 7);
  const auto a = cluster_subareas(planted.map, ClusterConfig{});
  const auto b = cluster_subareas(planted.map, ClusterConfig{});
  EXPECT_EQ(a.subareas, b.subareas);
  for (std::size_t c = 0; c < a.subareas.size(); ++c) {
    const auto m = a.kmedoids.medoids[c];
    EXPECT_EQ(a.subareas[c].centroid, a.rp_medoids[m]);
    EXPECT_NE(std::ranges::find(a.subareas[c].member_rp_ids, planted.map.rps[m].id),
              a.subareas[c].member_rp_ids.end());
  }
}

TEST(LocateSubarea, CentroidAndScaling) {
  const auto planted = gen_planted_regimes(3, 42);
  const auto subareas = build_subareas(planted.map, ClusterConfig{});
  for (const auto& s : subareas) {
    EXPECT_EQ(locate_subarea(s.centroid, subareas).id, s.id);
    // Scaling the shifted vector; factors below 1 keep every reading <= 0 dBm.
    for (double c : {0.5, 0.25}) {
      Fingerprint scaled = s.centroid;
      for (auto& [ap, rss] : scaled.readings) rss = c * (rss + 100.0) - 100.0;
      EXPECT_EQ(locate_subarea(scaled, subareas).id, s.id);
    }
  }
  EXPECT_THROW(locate_subarea(fp({{"x", -50}}), std::span<const Subarea>{}), InvalidArgument);
}

TEST(LocateSubarea, TiesGoToLowestId) {
  const auto c = fp({{"a", -50}});
  std::vector<Subarea> subareas{{2, c, {0}}, {1, c, {1}}};
  EXPECT_EQ(locate_subarea(c, subareas).id, 1);
}

TEST(LocateSubarea, NoisyPlantedQueriesLandInTheirRegime) {
  const auto planted = gen_planted_regimes(3, 42);
  const auto subareas = build_subareas(planted.map, ClusterConfig{});
  std::map<int, int> rp_to_subarea;
  for (const auto& s : subareas)
    for (int id : s.member_rp_ids) rp_to_subarea[id] = s.id;
  int hits = 0;
  for (int t = 0; t < 300; ++t) {
    auto rng = sub_rng(42, 99, static_cast<std::uint64_t>(t));
    const auto i = std::uniform_int_distribution<std::size_t>(0, planted.map.rps.size() - 1)(rng);
    const auto q = planted.sample(i, 2.0, rng);
    hits += locate_subarea(q, subareas).id == rp_to_subarea[planted.map.rps[i].id];
  }
  EXPECT_GE(hits / 300.0, 0.95);
}
