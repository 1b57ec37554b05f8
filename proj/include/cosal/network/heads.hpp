// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "cosal/core/nn.hpp"

namespace cosal {

/// Channel convention for all two-way heads: channel 0 = background,
/// channel 1 = foreground. The attention map handed to downstream consumers
/// is the raw foreground logit; the probability map is its softmax.
template <typename T>
struct TwoWayHeadOutputs {
  Variable<T> att;   // [N,1,H,W] foreground pre-softmax logit
  Variable<T> prob;  // [N,1,H,W] foreground probability
};

namespace detail {

template <typename T>
TwoWayHeadOutputs<T> two_way_split(const Variable<T>& logits) {
  TwoWayHeadOutputs<T> out;
  out.att = select_channel(logits, 1);
  out.prob = select_channel(softmax_channels(logits), 1);
  return out;
}

}  // namespace detail

/// Edge collaborator: one shared 2-channel 1x1 convolution on the low-level
/// feature; the probability map is supervised, the logit feeds the collector.
template <typename T>
class EdgeHead : public Module<T> {
 public:
  explicit EdgeHead(std::mt19937_64& rng, int in_ch = 64)
      : conv_(rng, in_ch, 2, 1, ConvSpec{1, 0, 1}, true) {
    this->register_child("conv", conv_);
  }

  TwoWayHeadOutputs<T> forward(const Variable<T>& f_low) {
    return detail::two_way_split(conv_.forward(f_low));
  }

  Conv2d<T>& conv() { return conv_; }

 private:
  Conv2d<T> conv_;
};

/// Coarse-saliency collaborator on the high-level feature: the same shared
/// 2-channel pattern. apply() is the identity-protected spatial attention
/// (att (x) f + f); whether it runs is the caller's ablation decision.
template <typename T>
class SaliencyAttentionHead : public Module<T> {
 public:
  explicit SaliencyAttentionHead(std::mt19937_64& rng, int in_ch = 64)
      : conv_(rng, in_ch, 2, 1, ConvSpec{1, 0, 1}, true) {
    this->register_child("conv", conv_);
  }

  TwoWayHeadOutputs<T> forward(const Variable<T>& f_high) {
    return detail::two_way_split(conv_.forward(f_high));
  }

  Variable<T> apply(const Variable<T>& f_high, const Variable<T>& att_sal) {
    return spatial_attention_residual(f_high, att_sal);
  }

  Conv2d<T>& conv() { return conv_; }

 private:
  Conv2d<T> conv_;
};

template <typename T>
struct DepthStageOutputs {
  Variable<T> att_depth;  // [N,1,H,W] estimated depth map (raw regression)
  Variable<T> m_c;        // [N,C,1,1] channel weights, softmax over channels
  Variable<T> f_hc;       // channel-recalibrated feature, same shape as input
};

/// Depth collaborator: a three-layer 3x3 trunk adapts the saliency-enhanced
/// feature to depth regression; a 1x1 convolution emits the depth map, which
/// is then lifted to 64 channels, mean-pooled and channel-softmaxed into the
/// recalibration vector (conv strictly before pooling).
template <typename T>
class DepthAttentionHead : public Module<T> {
 public:
  explicit DepthAttentionHead(std::mt19937_64& rng, int channels = 64)
      : trunk1_(rng, channels, channels, 3, ConvSpec{1, 1, 1}),
        trunk2_(rng, channels, channels, 3, ConvSpec{1, 1, 1}),
        trunk3_(rng, channels, channels, 3, ConvSpec{1, 1, 1}),
        depth_conv_(rng, channels, 1, 1, ConvSpec{1, 0, 1}, true),
        channel_conv_(rng, 1, channels, 1, ConvSpec{1, 0, 1}, true) {
    this->register_child("trunk1", trunk1_);
    this->register_child("trunk2", trunk2_);
    this->register_child("trunk3", trunk3_);
    this->register_child("depth_conv", depth_conv_);
    this->register_child("channel_conv", channel_conv_);
  }

  /// The three-layer adaptation trunk on its own (exposed so tests can
  /// recompute the depth map from its output with an independent oracle).
  Variable<T> adapt(const Variable<T>& f_h_tilde) {
    return trunk3_.forward(trunk2_.forward(trunk1_.forward(f_h_tilde)));
  }

  DepthStageOutputs<T> forward(const Variable<T>& f_h_tilde) {
    auto adapted = adapt(f_h_tilde);
    DepthStageOutputs<T> out;
    out.att_depth = depth_conv_.forward(adapted);
    auto lifted = channel_conv_.forward(out.att_depth);
    out.m_c = softmax_channels(global_avg_pool(lifted));
    out.f_hc = channel_attention_residual(f_h_tilde, out.m_c);
    return out;
  }

  Conv2d<T>& depth_conv() { return depth_conv_; }
  Conv2d<T>& channel_conv() { return channel_conv_; }

 private:
  ConvBnPRelu<T> trunk1_, trunk2_, trunk3_;
  Conv2d<T> depth_conv_;
  Conv2d<T> channel_conv_;
};

}  // namespace cosal
