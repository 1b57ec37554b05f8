// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cosal/core/error.hpp"
#include "cosal/data/edge.hpp"
#include "cosal/data/manifest.hpp"
#include "cosal/data/sample.hpp"

namespace cosal::data {

namespace detail {

struct SyntheticMats {
  cv::Mat rgb;    // 8UC3, BGR as written to disk
  cv::Mat depth;  // 8UC1, radial gradient, objects nearer
  cv::Mat gt;     // 8UC1, 0/255 object mask
};

/// Procedural scene: a color-gradient background with radial-gradient depth
/// and 1-2 filled ellipses/rectangles as the salient objects sitting nearer
/// than any background pixel. Everything a sample needs with zero downloads.
inline SyntheticMats make_synthetic_mats(std::uint64_t seed, std::int64_t side) {
  check<ConfigError>(side >= 16, "synthetic scenes need side >= 16, got ", side);
  const int s = static_cast<int>(side);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> color(0, 255);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticMats out;
  out.rgb = cv::Mat(s, s, CV_8UC3);
  out.depth = cv::Mat(s, s, CV_8UC1);
  out.gt = cv::Mat::zeros(s, s, CV_8UC1);

  const cv::Vec3b c0(static_cast<std::uint8_t>(color(rng)), static_cast<std::uint8_t>(color(rng)),
                     static_cast<std::uint8_t>(color(rng)));
  const cv::Vec3b c1(static_cast<std::uint8_t>(color(rng)), static_cast<std::uint8_t>(color(rng)),
                     static_cast<std::uint8_t>(color(rng)));
  const double cy = (0.25 + 0.5 * unit(rng)) * s;
  const double cx = (0.25 + 0.5 * unit(rng)) * s;
  const double max_dist = std::hypot(std::max(cy, s - cy), std::max(cx, s - cx));
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double t = static_cast<double>(x + y) / (2.0 * (s - 1));
      for (int ch = 0; ch < 3; ++ch)
        out.rgb.at<cv::Vec3b>(y, x)[ch] =
            static_cast<std::uint8_t>(std::lround((1.0 - t) * c0[ch] + t * c1[ch]));
      const double d = std::hypot(y - cy, x - cx) / max_dist;
      out.depth.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(80.0 + 175.0 * std::min(d, 1.0)));
    }
  }

  const int n_shapes = 1 + static_cast<int>(unit(rng) < 0.5);
  for (int i = 0; i < n_shapes; ++i) {
    const int ox = static_cast<int>((0.3 + 0.4 * unit(rng)) * s);
    const int oy = static_cast<int>((0.3 + 0.4 * unit(rng)) * s);
    const int ax = s / 8 + static_cast<int>(unit(rng) * s / 8);
    const int ay = s / 8 + static_cast<int>(unit(rng) * s / 8);
    const cv::Scalar fill(color(rng), color(rng), color(rng));
    const int near_depth = 10 + static_cast<int>(unit(rng) * 50);
    if (unit(rng) < 0.5) {
      cv::ellipse(out.rgb, {ox, oy}, {ax, ay}, 0, 0, 360, fill, cv::FILLED);
      cv::ellipse(out.gt, {ox, oy}, {ax, ay}, 0, 0, 360, cv::Scalar(255), cv::FILLED);
      cv::ellipse(out.depth, {ox, oy}, {ax, ay}, 0, 0, 360, cv::Scalar(near_depth), cv::FILLED);
    } else {
      const cv::Rect r(ox - ax, oy - ay, 2 * ax, 2 * ay);
      cv::rectangle(out.rgb, r, fill, cv::FILLED);
      cv::rectangle(out.gt, r, cv::Scalar(255), cv::FILLED);
      cv::rectangle(out.depth, r, cv::Scalar(near_depth), cv::FILLED);
    }
  }
  return out;
}

inline Tensor<float> mat8_to_unit_map(const cv::Mat& m) {
  Tensor<float> t(Shape{m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) t.at(y, x) = m.at<std::uint8_t>(y, x) / 255.0f;
  return t;
}

}  // namespace detail

/// In-memory synthetic sample with the same conversion semantics the disk
/// loader applies: mask thresholded at 128, depth min-max normalized, edge
/// map derived from the mask.
inline SaliencySample make_synthetic_sample(std::uint64_t seed, std::int64_t side = 64) {
  auto mats = detail::make_synthetic_mats(seed, side);
  SaliencySample s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%03llu", static_cast<unsigned long long>(seed));
  s.id = buf;
  s.rgb = Tensor<float>(Shape{3, side, side});
  const std::int64_t plane = side * side;
  for (int y = 0; y < mats.rgb.rows; ++y) {
    for (int x = 0; x < mats.rgb.cols; ++x) {
      const auto& px = mats.rgb.at<cv::Vec3b>(y, x);
      const std::int64_t i = static_cast<std::int64_t>(y) * side + x;
      s.rgb[0 * plane + i] = px[2] / 255.0f;
      s.rgb[1 * plane + i] = px[1] / 255.0f;
      s.rgb[2 * plane + i] = px[0] / 255.0f;
    }
  }
  s.sal_gt = Tensor<float>(Shape{side, side});
  for (int y = 0; y < mats.gt.rows; ++y)
    for (int x = 0; x < mats.gt.cols; ++x)
      s.sal_gt.at(y, x) = mats.gt.at<std::uint8_t>(y, x) >= 128 ? 1.0f : 0.0f;
  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(mats.depth, &lo, &hi);
  s.depth_gt = Tensor<float>(Shape{side, side});
  if (hi > lo) {
    for (int y = 0; y < mats.depth.rows; ++y)
      for (int x = 0; x < mats.depth.cols; ++x)
        s.depth_gt.at(y, x) =
            static_cast<float>((mats.depth.at<std::uint8_t>(y, x) - lo) / (hi - lo));
  }
  s.edge_gt = derive_edge_gt(s.sal_gt);
  return s;
}

/// Writes `count` synthetic scenes under `<root>/<split>/{RGB,depth,GT}` so
/// the directory scanner and loader run against real files. Returns the
/// split directory.
inline std::filesystem::path write_synthetic_dataset(const std::filesystem::path& root,
                                                     Split split, int count,
                                                     std::int64_t side = 64,
                                                     std::uint64_t seed0 = 1) {
  check<ConfigError>(count > 0, "write_synthetic_dataset: count must be positive");
  const std::filesystem::path base = root / split_name(split);
  std::filesystem::create_directories(base / "RGB");
  std::filesystem::create_directories(base / "depth");
  std::filesystem::create_directories(base / "GT");
  for (int i = 0; i < count; ++i) {
    auto mats = detail::make_synthetic_mats(seed0 + static_cast<std::uint64_t>(i), side);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%03d.png", i);
    const std::string name = buf;
    check<IngestionError>(cv::imwrite((base / "RGB" / name).string(), mats.rgb),
                          "failed to write ", (base / "RGB" / name).string());
    check<IngestionError>(cv::imwrite((base / "depth" / name).string(), mats.depth),
                          "failed to write ", (base / "depth" / name).string());
    check<IngestionError>(cv::imwrite((base / "GT" / name).string(), mats.gt),
                          "failed to write ", (base / "GT" / name).string());
  }
  return base;
}

}  // namespace cosal::data
