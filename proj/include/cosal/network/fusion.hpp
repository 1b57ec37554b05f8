// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <random>
#include <vector>

#include "cosal/core/nn.hpp"

namespace cosal {

/// Final knowledge fusion: the concatenated feature is recalibrated by the
/// raw depth map (residual-protected), then by a fused location/boundary
/// attention learned from the saliency and edge logits (concat order:
/// saliency first, then edge). Each attention ingredient is individually
/// switchable to reproduce the collector ablation rows.
template <typename T>
class AttentionFusion : public Module<T> {
 public:
  AttentionFusion(std::mt19937_64& rng, bool use_att_edge, bool use_att_sal, bool use_att_depth)
      : use_att_edge_(use_att_edge), use_att_sal_(use_att_sal), use_att_depth_(use_att_depth) {
    const int att_inputs = (use_att_sal ? 1 : 0) + (use_att_edge ? 1 : 0);
    if (att_inputs > 0) {
      att_conv_.emplace(rng, att_inputs, 2, 1, ConvSpec{1, 0, 1}, true);
      this->register_child("att_conv", *att_conv_);
    }
  }

  bool uses_att_edge() const { return use_att_edge_; }
  bool uses_att_sal() const { return use_att_sal_; }
  bool uses_att_depth() const { return use_att_depth_; }

  struct Outputs {
    Variable<T> att_f;      // [N,1,H,W] fused attention (foreground softmax); undefined if unused
    Variable<T> f_g_tilde;  // after the depth recalibration (or f_g when disabled)
    Variable<T> fused;      // final collector feature F
  };

  Outputs forward(const Variable<T>& f_g, const Variable<T>& att_edge,
                  const Variable<T>& att_sal, const Variable<T>& att_depth) {
    Outputs out;
    out.f_g_tilde = use_att_depth_ ? spatial_attention_residual(f_g, att_depth) : f_g;
    if (att_conv_) {
      std::vector<Variable<T>> parts;
      if (use_att_sal_) parts.push_back(att_sal);
      if (use_att_edge_) parts.push_back(att_edge);
      auto logits = att_conv_->forward(concat_channels<T>(parts));
      out.att_f = select_channel(softmax_channels(logits), 1);
      out.fused = spatial_attention_residual(out.f_g_tilde, out.att_f);
    } else {
      out.fused = out.f_g_tilde;
    }
    return out;
  }

  Conv2d<T>& att_conv() { return *att_conv_; }

 private:
  bool use_att_edge_;
  bool use_att_sal_;
  bool use_att_depth_;
  std::optional<Conv2d<T>> att_conv_;
};

}  // namespace cosal
