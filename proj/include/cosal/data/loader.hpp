// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <functional>
#include <iostream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cosal/core/error.hpp"
#include "cosal/core/tensor.hpp"
#include "cosal/data/edge.hpp"
#include "cosal/data/manifest.hpp"
#include "cosal/data/sample.hpp"

namespace cosal::data {

/// Counts every depth-file read in the process. Inference and evaluation
/// assert this stays flat across their run: depth is training supervision,
/// never an input.
inline std::atomic<std::uint64_t>& depth_read_count() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

/// Non-fatal loader diagnostics (e.g. a constant depth map). Tests may swap
/// the handler to capture messages.
inline std::function<void(const std::string&)>& warn_handler() {
  static std::function<void(const std::string&)> handler = [](const std::string& m) {
    std::cerr << "warning: " << m << "\n";
  };
  return handler;
}

struct LoadOptions {
  std::int64_t target_side = 256;
  bool invert_depth = false;
};

namespace detail {

inline cv::Mat imread_or_throw(const std::filesystem::path& path, int flags) {
  cv::Mat m = cv::imread(path.string(), flags);
  check<IngestionError>(!m.empty(), "cannot read image file: ", path.string());
  return m;
}

inline cv::Mat resize_to(const cv::Mat& m, const cv::Size& target, int interpolation) {
  if (m.size() == target) return m;
  cv::Mat out;
  cv::resize(m, out, target, 0, 0, interpolation);
  return out;
}

/// 8-bit BGR mat to a {3,H,W} float tensor in [0,1], RGB channel order.
inline Tensor<float> bgr_to_rgb_tensor(const cv::Mat& m) {
  Tensor<float> t(Shape{3, m.rows, m.cols});
  const auto plane = static_cast<std::int64_t>(m.rows) * m.cols;
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const auto& px = m.at<cv::Vec3b>(y, x);
      const std::int64_t i = static_cast<std::int64_t>(y) * m.cols + x;
      t[0 * plane + i] = px[2] / 255.0f;
      t[1 * plane + i] = px[1] / 255.0f;
      t[2 * plane + i] = px[0] / 255.0f;
    }
  }
  return t;
}

inline Tensor<float> mat_to_map(const cv::Mat& m32f) {
  Tensor<float> t(Shape{m32f.rows, m32f.cols});
  for (int y = 0; y < m32f.rows; ++y)
    for (int x = 0; x < m32f.cols; ++x) t.at(y, x) = m32f.at<float>(y, x);
  return t;
}

/// Per-image min-max normalization to [0,1]; a constant map has no usable
/// ordering signal and collapses to zeros with a warning.
inline Tensor<float> normalize_depth(const cv::Mat& m32f, bool invert, const std::string& name) {
  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(m32f, &lo, &hi);
  Tensor<float> t(Shape{m32f.rows, m32f.cols});
  if (hi <= lo) {
    warn_handler()(msg("constant depth map normalized to all-zero: ", name));
    return t;
  }
  const float scale = 1.0f / static_cast<float>(hi - lo);
  for (int y = 0; y < m32f.rows; ++y) {
    for (int x = 0; x < m32f.cols; ++x) {
      const float v = (m32f.at<float>(y, x) - static_cast<float>(lo)) * scale;
      t.at(y, x) = invert ? 1.0f - v : v;
    }
  }
  return t;
}

}  // namespace detail

/// Decodes one manifest record: RGB bilinear-resized to target_side^2 in
/// [0,1]; GT mask nearest-resized then thresholded at 128; depth (when the
/// record has one) bilinear-resized and min-max normalized; edge GT derived
/// from the resized mask.
inline SaliencySample load_sample(const ManifestRecord& rec, const LoadOptions& opt = {}) {
  check<ConfigError>(opt.target_side > 0, "load_sample: target_side must be positive");
  const auto side = static_cast<int>(opt.target_side);
  const cv::Size target(side, side);

  SaliencySample s;
  s.id = rec.id;

  cv::Mat rgb = detail::imread_or_throw(rec.rgb, cv::IMREAD_COLOR);
  cv::Mat rgb_r = detail::resize_to(rgb, target, cv::INTER_LINEAR);
  s.rgb = detail::bgr_to_rgb_tensor(rgb_r);

  cv::Mat gt = detail::imread_or_throw(rec.gt, cv::IMREAD_GRAYSCALE);
  cv::Mat gt_r = detail::resize_to(gt, target, cv::INTER_NEAREST);
  s.sal_gt = Tensor<float>(Shape{opt.target_side, opt.target_side});
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      s.sal_gt.at(y, x) = gt_r.at<std::uint8_t>(y, x) >= 128 ? 1.0f : 0.0f;

  if (rec.has_depth()) {
    depth_read_count().fetch_add(1, std::memory_order_relaxed);
    cv::Mat depth = detail::imread_or_throw(rec.depth, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
    cv::Mat depth32;
    depth.convertTo(depth32, CV_32F);
    cv::Mat depth_r = detail::resize_to(depth32, target, cv::INTER_LINEAR);
    s.depth_gt = detail::normalize_depth(depth_r, opt.invert_depth, rec.depth.string());
  }

  s.edge_gt = derive_edge_gt(s.sal_gt);
  return s;
}

inline SaliencySample load_sample(const DatasetManifest& m, std::size_t index,
                                  std::int64_t target_side = 256) {
  check<ConfigError>(index < m.records.size(), "load_sample: record index ", index,
                     " out of range (manifest has ", m.records.size(), ")");
  LoadOptions opt;
  opt.target_side = target_side;
  opt.invert_depth = m.invert_depth;
  return load_sample(m.records[index], opt);
}

}  // namespace cosal::data
