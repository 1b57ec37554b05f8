// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cosal/core/error.hpp"
#include "cosal/core/tensor.hpp"
#include "cosal/data/edge.hpp"
#include "cosal/data/sample.hpp"

namespace cosal::data {

/// Fully describes one drawn augmentation so the identical geometry can be
/// replayed on any map: horizontal flip, then crop (rect in flipped
/// coordinates) resized back to the input size, then a right-angle rotation.
struct AugmentLog {
  bool hflip = false;
  std::int64_t crop_y = 0;
  std::int64_t crop_x = 0;
  std::int64_t crop_h = 0;
  std::int64_t crop_w = 0;
  int rot_quarters = 0;  // counter-clockwise quarter turns, 0..3
};

/// Samples a log: flip with p=0.5, crop area uniform in 87.5-100% of the
/// image (axis scale sqrt of the area fraction), rotation uniform over the
/// four right angles.
inline AugmentLog draw_augment(std::uint64_t seed, std::int64_t h, std::int64_t w) {
  check<ConfigError>(h > 0 && w > 0, "draw_augment: empty image");
  std::mt19937_64 rng(seed);
  AugmentLog log;
  log.hflip = std::bernoulli_distribution(0.5)(rng);
  const double side_frac = std::sqrt(std::uniform_real_distribution<double>(0.875, 1.0)(rng));
  log.crop_h = std::clamp<std::int64_t>(std::llround(side_frac * static_cast<double>(h)), 1, h);
  log.crop_w = std::clamp<std::int64_t>(std::llround(side_frac * static_cast<double>(w)), 1, w);
  log.crop_y = std::uniform_int_distribution<std::int64_t>(0, h - log.crop_h)(rng);
  log.crop_x = std::uniform_int_distribution<std::int64_t>(0, w - log.crop_w)(rng);
  log.rot_quarters = std::uniform_int_distribution<int>(0, 3)(rng);
  return log;
}

namespace detail {

inline cv::Mat map_to_mat32f(const Tensor<float>& map) {
  cv::Mat m(static_cast<int>(map.dim(0)), static_cast<int>(map.dim(1)), CV_32FC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) m.at<float>(y, x) = map.at(y, x);
  return m;
}

}  // namespace detail

/// Replays the logged geometry on one {H,W} map. Masks use nearest-neighbor
/// resampling so binary maps stay binary; continuous maps use bilinear.
inline Tensor<float> apply_geometry(const Tensor<float>& map, const AugmentLog& log,
                                    bool nearest) {
  check(map.rank() == 2, "apply_geometry: expected a rank-2 map, got rank ", map.rank());
  const auto h = map.dim(0);
  const auto w = map.dim(1);
  check<ConfigError>(log.crop_y >= 0 && log.crop_x >= 0 && log.crop_h >= 1 && log.crop_w >= 1 &&
                         log.crop_y + log.crop_h <= h && log.crop_x + log.crop_w <= w,
                     "apply_geometry: crop rect outside the image");
  cv::Mat m = detail::map_to_mat32f(map);
  if (log.hflip) {
    cv::Mat flipped;
    cv::flip(m, flipped, 1);
    m = flipped;
  }
  if (log.crop_h != h || log.crop_w != w) {
    cv::Mat crop = m(cv::Rect(static_cast<int>(log.crop_x), static_cast<int>(log.crop_y),
                              static_cast<int>(log.crop_w), static_cast<int>(log.crop_h)))
                       .clone();
    cv::resize(crop, m, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0,
               nearest ? cv::INTER_NEAREST : cv::INTER_LINEAR);
  }
  switch (((log.rot_quarters % 4) + 4) % 4) {
    case 1: cv::rotate(m, m, cv::ROTATE_90_COUNTERCLOCKWISE); break;
    case 2: cv::rotate(m, m, cv::ROTATE_180); break;
    case 3: cv::rotate(m, m, cv::ROTATE_90_CLOCKWISE); break;
    default: break;
  }
  Tensor<float> out(Shape{m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out.at(y, x) = m.at<float>(y, x);
  return out;
}

/// Applies one log to a whole sample: RGB and depth bilinear, saliency mask
/// nearest, and the edge map re-derived from the transformed mask (rotating
/// a rasterized edge map would thicken it; re-derivation keeps it crisp).
inline SaliencySample apply_augment(const SaliencySample& s, const AugmentLog& log) {
  SaliencySample out;
  out.id = s.id;
  out.sal_gt = apply_geometry(s.sal_gt, log, /*nearest=*/true);
  const auto h = out.sal_gt.dim(0);
  const auto w = out.sal_gt.dim(1);
  out.rgb = Tensor<float>(Shape{3, h, w});
  for (std::int64_t c = 0; c < 3; ++c) {
    Tensor<float> plane(Shape{s.rgb.dim(1), s.rgb.dim(2)});
    const std::int64_t in_plane = s.rgb.dim(1) * s.rgb.dim(2);
    for (std::int64_t i = 0; i < in_plane; ++i) plane[i] = s.rgb[c * in_plane + i];
    Tensor<float> moved = apply_geometry(plane, log, /*nearest=*/false);
    for (std::int64_t i = 0; i < h * w; ++i) out.rgb[c * h * w + i] = moved[i];
  }
  if (s.has_depth()) out.depth_gt = apply_geometry(s.depth_gt, log, /*nearest=*/false);
  out.edge_gt = derive_edge_gt(out.sal_gt);
  return out;
}

inline SaliencySample augment(const SaliencySample& s, std::uint64_t seed) {
  return apply_augment(s, draw_augment(seed, s.height(), s.width()));
}

}  // namespace cosal::data
