// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "cosal/core/tensor.hpp"

namespace cosal::data {

/// One training/evaluation example. Maps are stored planar: rgb is {3,H,W}
/// in [0,1], the three ground-truth maps are {H,W}. depth_gt is supervision
/// only and may be absent (undefined tensor) outside the training split.
struct SaliencySample {
  std::string id;
  Tensor<float> rgb;
  Tensor<float> depth_gt;
  Tensor<float> sal_gt;
  Tensor<float> edge_gt;

  bool has_depth() const { return depth_gt.defined(); }

  std::int64_t height() const { return sal_gt.dim(0); }
  std::int64_t width() const { return sal_gt.dim(1); }
};

}  // namespace cosal::data
