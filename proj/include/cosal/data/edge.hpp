// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cosal/core/error.hpp"
#include "cosal/core/tensor.hpp"

namespace cosal::data {

namespace detail {

/// Binary {H,W} tensor (levels {0,1} or {0,255}) to an 8-bit 0/255 mat.
/// Any other level set is rejected, so edge derivation never runs on soft
/// maps where the detector thresholds would start to matter.
inline cv::Mat mask_to_mat8(const Tensor<float>& mask, const char* what) {
  check(mask.rank() == 2, what, ": expected a rank-2 mask, got rank ", mask.rank());
  const auto h = static_cast<int>(mask.dim(0));
  const auto w = static_cast<int>(mask.dim(1));
  cv::Mat m(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = mask.at(y, x);
      check<ValidationError>(v == 0.0f || v == 1.0f || v == 255.0f,
                             what, ": mask is not binary, found value ", v);
      m.at<std::uint8_t>(y, x) = v == 0.0f ? 0 : 255;
    }
  }
  return m;
}

}  // namespace detail

/// Boundary map of a binary saliency mask via Canny on the 8-bit-scaled
/// mask. Because the input has only two levels, every mask boundary pixel
/// carries a maximal gradient and the thresholds (fixed at 100/200 for
/// reproducibility) do not influence the result.
inline Tensor<float> derive_edge_gt(const Tensor<float>& sal_gt) {
  cv::Mat m8 = detail::mask_to_mat8(sal_gt, "derive_edge_gt");
  cv::Mat edges;
  cv::Canny(m8, edges, 100.0, 200.0);
  Tensor<float> out(Shape{sal_gt.dim(0), sal_gt.dim(1)});
  for (int y = 0; y < edges.rows; ++y)
    for (int x = 0; x < edges.cols; ++x)
      out.at(y, x) = edges.at<std::uint8_t>(y, x) ? 1.0f : 0.0f;
  return out;
}

}  // namespace cosal::data
