#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "arloc/errors.hpp"
#include "arloc/types.hpp"

namespace arloc {

/// Row-major grayscale image with values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0) : width(w), height(h), pixels(static_cast<std::size_t>(w * h), fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y * width + x)]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }

  // Edge-replicated read.
  double clamped(int x, int y) const { return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)); }
};

struct ExtractorConfig {
  int levels = 8;                                     // detection scales
  double sigma0 = 1.6;
  double scale_step = 1.2599210498948732;             // 2^(1/3)
  double contrast_threshold = 0.002;
  int border = 1;
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  GrayImage tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[static_cast<std::size_t>(i + radius)] * img.clamped(x + i, y);
      tmp.at(x, y) = s;
    }
  }
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[static_cast<std::size_t>(i + radius)] * tmp.clamped(x, y + i);
      out.at(x, y) = s;
    }
  }
  return out;
}

inline bool strict_extremum(const std::vector<GrayImage>& stack, std::size_t t, int x, int y) {
  const double v = stack[t].at(x, y);
  bool is_max = true;
  bool is_min = true;
  for (std::size_t s = t - 1; s <= t + 1; ++s) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (s == t && dx == 0 && dy == 0) continue;
        const double n = stack[s].at(x + dx, y + dy);
        if (n >= v) is_max = false;
        if (n <= v) is_min = false;
        if (!is_max && !is_min) return false;
      }
    }
  }
  return true;
}

}  // namespace detail

/// Gaussian scale space L(x, y, sigma): one guard level below sigma0 and one
/// above the last detection scale, so every detection scale has neighbours
/// on both sides along sigma. Level i sits at sigma0 * step^(i - 1).
inline std::vector<GrayImage> gaussian_scale_space(const GrayImage& img, const ExtractorConfig& cfg = {}) {
  std::vector<GrayImage> levels;
  levels.reserve(static_cast<std::size_t>(cfg.levels + 2));
  for (int i = 0; i < cfg.levels + 2; ++i) {
    levels.push_back(detail::gaussian_blur(img, cfg.sigma0 * std::pow(cfg.scale_step, i - 1)));
  }
  return levels;
}

/// n-th forward difference of the scale space along sigma.
inline std::vector<GrayImage> scale_difference(const std::vector<GrayImage>& space, int order) {
  std::vector<GrayImage> cur = space;
  for (int n = 0; n < order; ++n) {
    std::vector<GrayImage> next;
    for (std::size_t t = 0; t + 1 < cur.size(); ++t) {
      GrayImage d(cur[t].width, cur[t].height);
      for (std::size_t p = 0; p < d.pixels.size(); ++p) d.pixels[p] = cur[t + 1].pixels[p] - cur[t].pixels[p];
      next.push_back(std::move(d));
    }
    cur = std::move(next);
  }
  return cur;
}

/// 16-entry descriptor: gradient-orientation histogram (4 bins) in each of the
/// four quadrants around (x, y), magnitude weighted, L2 normalised.
inline std::vector<double> patch_descriptor(const GrayImage& level, int x, int y, double sigma) {
  std::vector<double> desc(kDefaultDescriptorSize, 0.0);
  const int radius = std::max(2, static_cast<int>(std::lround(2.0 * sigma)));
  constexpr double kBinWidth = std::numbers::pi / 2.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int px = x + dx;
      const int py = y + dy;
      if (px < 0 || py < 0 || px >= level.width || py >= level.height) continue;
      const double gx = level.clamped(px + 1, py) - level.clamped(px - 1, py);
      const double gy = level.clamped(px, py + 1) - level.clamped(px, py - 1);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += 2.0 * std::numbers::pi;
      const int bin = std::min(3, static_cast<int>(angle / kBinWidth));
      const int cell = (dy < 0 ? 0 : 2) + (dx < 0 ? 0 : 1);
      desc[static_cast<std::size_t>(cell * 4 + bin)] += mag;
    }
  }
  double n2 = 0.0;
  for (double v : desc) n2 += v * v;
  if (n2 > 0.0) {
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : desc) v *= inv;
  }
  return desc;
}

/// Keypoints at the zero crossings of the n-th scale derivative, n = 1..max_order.
///
/// For each order the n-th difference volume is scanned for strict extrema
/// over the 3x3x3 neighbourhood whose magnitude exceeds the contrast
/// threshold. Keypoints of all orders are concatenated, lowest order first.
inline KeypointSet extract_keypoints(const GrayImage& image, int max_order, const ExtractorConfig& cfg = {}) {
  if (image.width < 16 || image.height < 16) throw InvalidArgument("image must be at least 16x16");
  if (max_order < 1 || max_order > 4) throw InvalidArgument("max_order must lie in 1..4");
  if (image.pixels.size() != static_cast<std::size_t>(image.width * image.height))
    throw InvalidArgument("pixel buffer does not match image dimensions");

  const auto space = gaussian_scale_space(image, cfg);
  KeypointSet out;
  const int b = std::max(1, cfg.border);
  for (int order = 1; order <= max_order; ++order) {
    const auto diff = scale_difference(space, order);
    for (std::size_t t = 1; t + 1 < diff.size(); ++t) {
      // diff[t] spans space levels t..t+order; its scale is their geometric centre.
      const double level_pos = static_cast<double>(t) - 1.0 + order / 2.0;
      const double sigma = cfg.sigma0 * std::pow(cfg.scale_step, level_pos);
      const auto& desc_level =
          space[static_cast<std::size_t>(std::clamp<long>(std::lround(level_pos + 1.0), 0, static_cast<long>(space.size()) - 1))];
      for (int y = b; y < image.height - b; ++y) {
        for (int x = b; x < image.width - b; ++x) {
          if (std::abs(diff[t].at(x, y)) <= cfg.contrast_threshold) continue;
          if (!detail::strict_extremum(diff, t, x, y)) continue;
          out.keypoints.push_back({static_cast<double>(x), static_cast<double>(y), sigma,
                                   patch_descriptor(desc_level, x, y, sigma)});
        }
      }
    }
  }
  return out;
}

}  // namespace arloc
