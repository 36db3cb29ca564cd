#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "arloc/fingerprint.hpp"
#include "arloc/synth.hpp"

using namespace arloc;

namespace {

SynthConfig noiseless() {
  SynthConfig c;
  c.rss_noise_sigma = 0;
  c.keypoint_jitter_px = 0;
  c.descriptor_noise = 0;
  c.view_yaw_noise = 0;
  c.trial_position_jitter = 0;
  return c;
}

// A fronto-parallel 5x5 patch of landmarks centred on the z axis at depth z.
std::vector<Landmark> patch(double z) {
  std::vector<Landmark> out;
  int id = 0;
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      Landmark lm;
      lm.id = id;
      lm.world_position = {0.12 * i + 0.01 * j, 1.6 + 0.1 * j, z};
      lm.size = 0.05;
      lm.signature.assign(kDefaultDescriptorSize, 0.0);
      lm.signature[static_cast<std::size_t>(id % 16)] = 1.0;
      lm.signature[static_cast<std::size_t>((id / 16 + 3 * id) % 16)] += 0.5;
      ++id;
      out.push_back(lm);
    }
  }
  return out;
}

}  // namespace

TEST(PathLoss, Values) {
  EXPECT_NEAR(path_loss_rss(10.0, -40.0, 2.5), -65.0, 1e-12);
  EXPECT_NEAR(path_loss_rss(1.0, -40.0, 2.5), -40.0, 1e-12);
  EXPECT_DOUBLE_EQ(path_loss_rss(0.01, -40.0, 2.5), path_loss_rss(0.1, -40.0, 2.5));
  EXPECT_NEAR(path_loss_rss(0.0, -40.0, 2.5), -15.0, 1e-12);
}

TEST(Fingerprint, NoiselessAndCapped) {
  SyntheticWorld w;
  w.aps = {{"near", {0, 0, 0}}, {"far", {10, 0, 0}}};
  auto cfg = noiseless();
  std::mt19937_64 rng(1);
  const auto fp = synth_fingerprint(w, Vec3{0, 0, 0}, cfg, 20.0, rng);
  EXPECT_DOUBLE_EQ(fp.readings.at("near"), 0.0);
  EXPECT_NEAR(fp.readings.at("far"), -45.0, 1e-12);
  EXPECT_TRUE(fp.valid());
}

TEST(ProjectView, OnAxisLandmarkHitsFrameCentre) {
  Landmark lm{0, {0.0, 1.6, 5.0}, 0.08, std::vector<double>(kDefaultDescriptorSize, 0.25)};
  Landmark behind{1, {0.0, 1.6, -5.0}, 0.08, std::vector<double>(kDefaultDescriptorSize, 0.25)};
  std::vector<Landmark> lms{lm, behind};
  auto cfg = noiseless();
  std::mt19937_64 rng(3);
  const auto view = project_view(eye_pose(Vec3{}, 0.0), lms, cfg, PoseConfig{}, rng);
  ASSERT_EQ(view.size(), 1u);
  EXPECT_NEAR(view.keypoints[0].px, 400.0, 1e-9);
  EXPECT_NEAR(view.keypoints[0].py, 300.0, 1e-9);
  EXPECT_NEAR(view.keypoints[0].sigma, 0.08 * focal_length_px(PoseConfig{}) / 5.0, 1e-9);
  EXPECT_EQ(view.keypoints[0].descriptor, lm.signature);
}

TEST(ProjectView, SmallOrOffFrameLandmarksAreDropped) {
  std::vector<Landmark> lms{{0, {0.0, 1.6, 9.0}, 0.02, std::vector<double>(16, 0.1)},
                            {1, {9.0, 1.6, 1.0}, 0.08, std::vector<double>(16, 0.1)}};
  std::mt19937_64 rng(3);
  EXPECT_TRUE(project_view(eye_pose(Vec3{}, 0.0), lms, noiseless(), PoseConfig{}, rng).empty());
}

TEST(ProjectView, NoiselessViewIsDeterministic) {
  const auto lms = patch(4.0);
  std::mt19937_64 a(1), b(999);
  const auto eye = eye_pose(Vec3{0.1, 0.0, 0.2}, 7.0);
  EXPECT_EQ(project_view(eye, lms, noiseless(), PoseConfig{}, a), project_view(eye, lms, noiseless(), PoseConfig{}, b));
}

TEST(ProjectView, DrTracksShootingDistanceRatio) {
  const auto lms = patch(6.0);
  SynthConfig cfg;  // default pixel jitter and descriptor noise
  cfg.min_keypoint_px = 0.0;
  MatchConfig match;
  for (auto [query_dist, expected] : {std::pair{2.0, 0.5}, {3.0, 1.0}, {2.0, 2.0}}) {
    const double cand_dist = query_dist / expected;
    std::mt19937_64 rng(17);
    const auto q = project_view(eye_pose(Vec3{0, 0, 6.0 - query_dist}, 0.0), lms, cfg, PoseConfig{}, rng);
    const auto c = project_view(eye_pose(Vec3{0, 0, 6.0 - cand_dist}, 0.0), lms, cfg, PoseConfig{}, rng);
    ASSERT_GE(image_similarity(q, c, match), 10);
    EXPECT_NEAR(distance_ratio(q, c, match), expected, 0.15 * expected) << query_dist << " vs " << cand_dist;
  }
}

TEST(ProjectView, NoiselessDrIsTheExactDistanceRatio) {
  const auto lms = patch(6.0);
  SynthConfig cfg;
  cfg.min_keypoint_px = 0.0;
  cfg.keypoint_jitter_px = 0.0;
  cfg.descriptor_noise = 0.0;
  MatchConfig match;
  for (auto [query_dist, cand_dist] : {std::pair{2.0, 4.0}, {3.0, 3.0}, {4.0, 2.0}, {1.5, 4.5}}) {
    std::mt19937_64 rng(3);
    const auto q = project_view(eye_pose(Vec3{0, 0, 6.0 - query_dist}, 0.0), lms, cfg, PoseConfig{}, rng);
    const auto c = project_view(eye_pose(Vec3{0, 0, 6.0 - cand_dist}, 0.0), lms, cfg, PoseConfig{}, rng);
    EXPECT_NEAR(distance_ratio(q, c, match), query_dist / cand_dist, 1e-9) << query_dist << " vs " << cand_dist;
  }
}

TEST(SubRng, StreamsAreIndependentAndRepeatable) {
  EXPECT_EQ(sub_rng(42, 1, 0)(), sub_rng(42, 1, 0)());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t i = 0; i < 50; ++i) firsts.insert(sub_rng(42, s, i)());
  EXPECT_EQ(firsts.size(), 200u);
}

TEST(StoredViews, EightFixedHeadings) {
  SynthConfig cfg;
  EXPECT_EQ(stored_headings(8), (std::vector<double>{0, 45, 90, 135, 180, 225, 270, 315}));
  for (int i = 0; i < cfg.images_per_rp; ++i) EXPECT_DOUBLE_EQ(stored_view_yaw(cfg, i), 45.0 * (i % 8));
  cfg.stored_yaw_spread = 1.0;
  for (int i = 0; i < cfg.images_per_rp; ++i) {
    const double off = wrap_heading(stored_view_yaw(cfg, i) - 45.0 * (i % 8) + 180.0) - 180.0;
    EXPECT_LT(std::abs(off), 22.5);
  }
}

TEST(Environment, CountsAndDeterminism) {
  SynthConfig cfg;
  const auto a = gen_environment(4, 2, 0.5, cfg);
  ASSERT_EQ(a.map.rps.size(), 45u);
  EXPECT_EQ(a.world.aps.size(), static_cast<std::size_t>(cfg.num_aps));
  EXPECT_EQ(a.map.objects.size(), static_cast<std::size_t>(cfg.num_objects));
  EXPECT_EQ(a.world.landmarks.size(),
            static_cast<std::size_t>(cfg.num_objects * cfg.landmarks_per_object + cfg.wall_landmarks));
  for (const auto& rp : a.map.rps) {
    EXPECT_EQ(rp.fingerprints.size(), 50u);
    EXPECT_EQ(rp.images.size(), 50u);
    for (const auto& fp : rp.fingerprints) EXPECT_TRUE(fp.valid());
    for (std::size_t i = 0; i < rp.images.size(); ++i) {
      const double off = wrap_heading(rp.viewpoint_headings[i] - 45.0 * static_cast<double>(i % 8) + 180.0) - 180.0;
      EXPECT_LT(std::abs(off), 6 * cfg.view_yaw_noise);
      EXPECT_EQ(rp.images[i].source_rp_id, rp.id);
    }
  }
  EXPECT_NO_THROW(a.map.validate());

  const auto b = gen_environment(4, 2, 0.5, cfg);
  EXPECT_EQ(a.map, b.map);
  EXPECT_EQ(a.world, b.world);

  cfg.seed = 7;
  EXPECT_NE(gen_environment(4, 2, 0.5, cfg).world, a.world);
}

TEST(Environment, ApsCoverTheFloor) {
  SynthConfig cfg;
  for (std::uint64_t seed : {1, 42, 99}) {
    cfg.seed = seed;
    const auto env = gen_environment(4, 2, 0.5, cfg);
    std::set<std::pair<int, int>> halves;
    for (const auto& ap : env.world.aps) {
      EXPECT_TRUE(env.map.contains_xz(ap.position));
      halves.insert({ap.position.x > 0, ap.position.z > 0});
    }
    EXPECT_EQ(halves.size(), 4u);
  }
}

TEST(Trials, DevicesOffsetsAndDeterminism) {
  const auto env = gen_environment(4, 2, 0.5, SynthConfig{});
  const auto devices = default_devices(3);
  EXPECT_EQ(devices, (std::vector<std::string>{"phone_a", "phone_b", "phone_c"}));
  const auto trials = gen_trials(env, 60, devices, 42);
  ASSERT_EQ(trials.size(), 60u);
  for (std::size_t t = 0; t < trials.size(); ++t) {
    EXPECT_EQ(trials[t].query.device_id, devices[t % 3]);
    const auto& rp = env.map.rp(trials[t].true_rp_id);
    EXPECT_LE(std::abs(trials[t].true_position.x - rp.position.x), 0.125 + 1e-12);
    EXPECT_LE(std::abs(trials[t].true_position.z - rp.position.z), 0.125 + 1e-12);
    EXPECT_EQ(nearest_rp(env.map, trials[t].true_position).id, rp.id);
    EXPECT_NO_THROW(trials[t].query.validate());
  }
  const auto again = gen_trials(env, 60, devices, 42);
  for (std::size_t t = 0; t < trials.size(); ++t) {
    EXPECT_EQ(again[t].true_position, trials[t].true_position);
    EXPECT_EQ(again[t].query.fingerprint, trials[t].query.fingerprint);
    EXPECT_EQ(again[t].query.keypoints, trials[t].query.keypoints);
  }
  EXPECT_NE(gen_trials(env, 1, devices, 43)[0].query.fingerprint, trials[0].query.fingerprint);
  EXPECT_THROW(gen_trials(env, -1, devices, 42), InvalidArgument);
}

TEST(Trials, NoiselessWorldIsSolvedByWifiAndExplainedForImages) {
  auto env = gen_environment(4, 2, 0.5, noiseless());
  ClusterConfig cc;
  env.map.subareas = build_subareas(env.map, cc);
  const Localizer loc(env.map, cc, MatchConfig{});
  const auto trials = gen_trials(env, 60, default_devices(1), 42);
  for (const auto& t : trials) {
    EXPECT_EQ(loc.localize(t.query, Method::kWifiOnly).rp_id, t.true_rp_id);
    // The query reproduces a stored view exactly, so its true RP scores a full
    // match. A miss is only possible when a lower-id RP also matches every
    // query keypoint and its duplicates fill the candidate list.
    for (Method m : {Method::kImageOnly, Method::kCombined, Method::kCombinedDr}) {
      const auto r = loc.localize(t.query, m);
      if (r.rp_id == t.true_rp_id) continue;
      ASSERT_FALSE(r.diagnostics.ranked.empty());
      const int full = static_cast<int>(t.query.keypoints.size());
      for (const auto& c : r.diagnostics.ranked) {
        EXPECT_EQ(c.similarity, full);
        EXPECT_LT(c.rp_id, t.true_rp_id);
      }
    }
  }
}

TEST(PlantedRegimes, Shape) {
  const auto p = gen_planted_regimes(3, 5);
  ASSERT_EQ(p.labels.size(), 45u);
  EXPECT_EQ(std::set<int>(p.labels.begin(), p.labels.end()).size(), 3u);
  for (const auto& rp : p.map.rps) EXPECT_EQ(rp.fingerprints.size(), 50u);
}
