#include <gtest/gtest.h>

#include <cmath>

#include "arloc/extractor.hpp"

using namespace arloc;

namespace {

GrayImage blob(int size, double cx, double cy, double sigma, double amplitude = 1.0) {
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img.at(x, y) = amplitude * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * sigma * sigma));
  return img;
}

// Direct 2-D convolution with an edge-replicated border.
GrayImage naive_blur(const GrayImage& img, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  double norm = 0;
  for (int i = -r; i <= r; ++i) norm += std::exp(-(i * i) / (2 * sigma * sigma));
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          s += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) * img.clamped(x + dx, y + dy);
      out.at(x, y) = s / (norm * norm);
    }
  }
  return out;
}

bool has_keypoint_near(const KeypointSet& set, double x, double y, double tol) {
  for (const auto& kp : set.keypoints)
    if (std::hypot(kp.px - x, kp.py - y) <= tol) return true;
  return false;
}

}  // namespace

TEST(ScaleSpace, MatchesDirectConvolution) {
  const auto img = blob(24, 9.3, 14.1, 2.5);
  ExtractorConfig cfg;
  cfg.levels = 3;
  const auto space = gaussian_scale_space(img, cfg);
  ASSERT_EQ(space.size(), 5u);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto ref = naive_blur(img, cfg.sigma0 * std::pow(cfg.scale_step, static_cast<double>(i) - 1.0));
    for (std::size_t p = 0; p < ref.pixels.size(); ++p) ASSERT_NEAR(space[i].pixels[p], ref.pixels[p], 1e-12);
  }
}

TEST(ScaleSpace, DifferenceOrders) {
  std::vector<GrayImage> space;
  for (double v : {1.0, 4.0, 9.0, 16.0, 25.0}) space.emplace_back(2, 2, v);
  const auto d1 = scale_difference(space, 1);
  ASSERT_EQ(d1.size(), 4u);
  EXPECT_DOUBLE_EQ(d1[0].at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(d1[3].at(1, 1), 9.0);
  const auto d2 = scale_difference(space, 2);
  ASSERT_EQ(d2.size(), 3u);
  for (const auto& g : d2) EXPECT_DOUBLE_EQ(g.at(1, 0), 2.0);
  const auto d3 = scale_difference(space, 3);
  for (const auto& g : d3) EXPECT_DOUBLE_EQ(g.at(0, 1), 0.0);
}

TEST(Extractor, ConstantImageHasNoKeypoints) {
  EXPECT_TRUE(extract_keypoints(GrayImage(32, 32, 0.5), 4).empty());
  EXPECT_TRUE(extract_keypoints(GrayImage(20, 40, 0.0), 1).empty());
}

TEST(Extractor, BlobDetectedAtEveryOrder) {
  const auto img = blob(32, 16, 16, 2.0);
  for (int order = 1; order <= 4; ++order) {
    const auto kps = extract_keypoints(img, order);
    EXPECT_TRUE(has_keypoint_near(kps, 16, 16, 1.0)) << "order " << order;
    for (const auto& kp : kps.keypoints) {
      EXPECT_EQ(kp.descriptor.size(), kDefaultDescriptorSize);
      EXPECT_GT(kp.sigma, 0.0);
    }
  }
}

TEST(Extractor, HigherOrderIsSuperset) {
  const auto img = blob(32, 12, 18, 2.0);
  auto acc = img;
  const auto second = blob(32, 22, 9, 1.5, 0.7);
  for (std::size_t p = 0; p < acc.pixels.size(); ++p) acc.pixels[p] += second.pixels[p];
  KeypointSet prev;
  for (int order = 1; order <= 4; ++order) {
    const auto cur = extract_keypoints(acc, order);
    ASSERT_GE(cur.size(), prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) EXPECT_EQ(cur.keypoints[i], prev.keypoints[i]);
    prev = cur;
  }
}

TEST(Extractor, DescriptorIsUnitLength) {
  const auto kps = extract_keypoints(blob(32, 16, 16, 2.0), 2);
  ASSERT_FALSE(kps.empty());
  for (const auto& kp : kps.keypoints) {
    double n = 0;
    for (double v : kp.descriptor) n += v * v;
    if (n > 0) {
      EXPECT_NEAR(n, 1.0, 1e-12);
    }
  }
}

TEST(Extractor, RejectsBadInput) {
  EXPECT_THROW(extract_keypoints(GrayImage(8, 32), 1), InvalidArgument);
  EXPECT_THROW(extract_keypoints(GrayImage(32, 32), 0), InvalidArgument);
  EXPECT_THROW(extract_keypoints(GrayImage(32, 32), 5), InvalidArgument);
  GrayImage broken(32, 32);
  broken.pixels.pop_back();
  EXPECT_THROW(extract_keypoints(broken, 1), InvalidArgument);
}
