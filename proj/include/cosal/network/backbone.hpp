// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "cosal/core/nn.hpp"

namespace cosal {

enum class BackboneScale { kFull, kTiny };

struct BackboneConfig {
  BackboneScale scale = BackboneScale::kTiny;
  int input_side = 256;
  // Side-out channel widths f1..f5. The full scale is fixed by its block
  // plan; the tiny scale takes these directly.
  std::array<int, 5> channel_widths = {8, 16, 32, 64, 64};
  std::string pretrained_weights_path;  // optional, loaded by the harness

  static BackboneConfig full(int input_side = 256) {
    BackboneConfig cfg;
    cfg.scale = BackboneScale::kFull;
    cfg.input_side = input_side;
    cfg.channel_widths = {64, 256, 512, 1024, 2048};
    return cfg;
  }
  static BackboneConfig tiny(int input_side = 64) {
    BackboneConfig cfg;
    cfg.input_side = input_side;
    return cfg;
  }

  void validate() const {
    check<ConfigError>(input_side >= 16 && input_side % 16 == 0,
                       "backbone: input_side must be a positive multiple of 16, got ", input_side);
    for (int w : channel_widths)
      check<ConfigError>(w > 0, "backbone: channel widths must be positive");
    if (scale == BackboneScale::kFull)
      check<ConfigError>((channel_widths == std::array<int, 5>{64, 256, 512, 1024, 2048}),
                         "backbone: full scale has fixed channel widths 64/256/512/1024/2048");
  }
};

template <typename T>
struct SideOutFeatures {
  Variable<T> f1, f2, f3, f4, f5;  // sides: /2, /4, /8, /16, /16
};

/// Residual block with a 1x1 reduce, 3x3 spatial, 1x1 expand plan. The
/// shortcut is projected when shape changes.
template <typename T>
class Bottleneck : public Module<T> {
 public:
  Bottleneck(std::mt19937_64& rng, int in_ch, int width, int out_ch, int stride, int dilation)
      : conv1_(rng, in_ch, width, 1, ConvSpec{1, 0, 1}, false),
        bn1_(width),
        conv2_(rng, width, width, 3, ConvSpec{stride, dilation, dilation}, false),
        bn2_(width),
        conv3_(rng, width, out_ch, 1, ConvSpec{1, 0, 1}, false),
        bn3_(out_ch) {
    this->register_child("conv1", conv1_);
    this->register_child("bn1", bn1_);
    this->register_child("conv2", conv2_);
    this->register_child("bn2", bn2_);
    this->register_child("conv3", conv3_);
    this->register_child("bn3", bn3_);
    if (in_ch != out_ch || stride != 1) {
      proj_.emplace(rng, in_ch, out_ch, 1, ConvSpec{stride, 0, 1}, false);
      proj_bn_.emplace(out_ch);
      this->register_child("proj", *proj_);
      this->register_child("proj_bn", *proj_bn_);
    }
  }

  Variable<T> forward(const Variable<T>& x) {
    auto y = relu(bn1_.forward(conv1_.forward(x)));
    y = relu(bn2_.forward(conv2_.forward(y)));
    y = bn3_.forward(conv3_.forward(y));
    Variable<T> shortcut = proj_ ? proj_bn_->forward(proj_->forward(x)) : x;
    return relu(add(y, shortcut));
  }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  Conv2d<T> conv3_;
  BatchNorm2d<T> bn3_;
  std::optional<Conv2d<T>> proj_;
  std::optional<BatchNorm2d<T>> proj_bn_;
};

template <typename T>
class BottleneckStage : public Module<T> {
 public:
  BottleneckStage(std::mt19937_64& rng, int in_ch, int width, int out_ch, int blocks, int stride,
                  int dilation) {
    blocks_.reserve(static_cast<std::size_t>(blocks));
    for (int i = 0; i < blocks; ++i) {
      blocks_.push_back(std::make_unique<Bottleneck<T>>(rng, i == 0 ? in_ch : out_ch, width,
                                                        out_ch, i == 0 ? stride : 1, dilation));
      this->register_child(std::to_string(i), *blocks_.back());
    }
  }

  Variable<T> forward(Variable<T> x) {
    for (auto& b : blocks_) x = b->forward(x);
    return x;
  }

 private:
  std::vector<std::unique_ptr<Bottleneck<T>>> blocks_;
};

/// Five-side-out feature extractor. The full scale follows the 50-layer
/// residual plan with a unit-stride, dilation-2 final stage so stages 4 and 5
/// share the same spatial size; the tiny scale is a plain five-stage stack
/// with the same stride schedule for desk-scale runs.
template <typename T>
class Backbone : public Module<T> {
 public:
  Backbone(std::mt19937_64& rng, const BackboneConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    if (cfg.scale == BackboneScale::kFull) {
      stem_conv_.emplace(rng, 3, 64, 7, ConvSpec{2, 3, 1}, false);
      stem_bn_.emplace(64);
      this->register_child("stem_conv", *stem_conv_);
      this->register_child("stem_bn", *stem_bn_);
      stage1_.emplace(rng, 64, 64, 256, 3, 1, 1);
      stage2_.emplace(rng, 256, 128, 512, 4, 2, 1);
      stage3_.emplace(rng, 512, 256, 1024, 6, 2, 1);
      stage4_.emplace(rng, 1024, 512, 2048, 3, 1, 2);
      this->register_child("stage1", *stage1_);
      this->register_child("stage2", *stage2_);
      this->register_child("stage3", *stage3_);
      this->register_child("stage4", *stage4_);
    } else {
      const auto& w = cfg.channel_widths;
      const int strides[5] = {2, 2, 2, 2, 1};
      const int dilations[5] = {1, 1, 1, 1, 2};
      int in_ch = 3;
      for (int i = 0; i < 5; ++i) {
        tiny_stages_.push_back(std::make_unique<ConvBnPRelu<T>>(
            rng, in_ch, w[static_cast<std::size_t>(i)], 3,
            ConvSpec{strides[i], dilations[i], dilations[i]}));
        this->register_child("tiny" + std::to_string(i + 1), *tiny_stages_.back());
        in_ch = w[static_cast<std::size_t>(i)];
      }
    }
  }

  const BackboneConfig& config() const { return cfg_; }

  SideOutFeatures<T> forward(const Variable<T>& image) {
    check(image.value().rank() == 4 && image.value().dim(1) == 3 &&
              image.value().dim(2) == cfg_.input_side && image.value().dim(3) == cfg_.input_side,
          "backbone: expected [N,3,", cfg_.input_side, ",", cfg_.input_side, "] input, got ",
          shape_str(image.shape()));
    SideOutFeatures<T> out;
    if (cfg_.scale == BackboneScale::kFull) {
      out.f1 = relu(stem_bn_->forward(stem_conv_->forward(image)));
      auto pooled = max_pool2d(out.f1, 3, 2, 1);
      out.f2 = stage1_->forward(pooled);
      out.f3 = stage2_->forward(out.f2);
      out.f4 = stage3_->forward(out.f3);
      out.f5 = stage4_->forward(out.f4);
    } else {
      out.f1 = tiny_stages_[0]->forward(image);
      out.f2 = tiny_stages_[1]->forward(out.f1);
      out.f3 = tiny_stages_[2]->forward(out.f2);
      out.f4 = tiny_stages_[3]->forward(out.f3);
      out.f5 = tiny_stages_[4]->forward(out.f4);
    }
    return out;
  }

 private:
  BackboneConfig cfg_;
  std::optional<Conv2d<T>> stem_conv_;
  std::optional<BatchNorm2d<T>> stem_bn_;
  std::optional<BottleneckStage<T>> stage1_, stage2_, stage3_, stage4_;
  std::vector<std::unique_ptr<ConvBnPRelu<T>>> tiny_stages_;
};

template <typename T>
struct TransitionedFeatures {
  Variable<T> t1;     // input_side, width[0] channels (upsample only)
  Variable<T> t2;     // input_side, width[1] channels (upsample only)
  Variable<T> t3, t4, t5;  // input_side/4, 64 channels
  Variable<T> f_low;  // input_side, 64 channels
};

/// Table-style transition layers: t1/t2 are plain upsamples, t3..t5 are
/// upsampled then fused to 64 channels, and the integrated low-level feature
/// comes from concat(t1, t2) through the same conv recipe.
template <typename T>
class TransitionLayers : public Module<T> {
 public:
  TransitionLayers(std::mt19937_64& rng, const std::array<int, 5>& widths)
      : conv_t3_(rng, widths[2], 64, 3, ConvSpec{1, 1, 1}),
        conv_t4_(rng, widths[3], 64, 3, ConvSpec{1, 1, 1}),
        conv_t5_(rng, widths[4], 64, 3, ConvSpec{1, 1, 1}),
        conv_low_(rng, widths[0] + widths[1], 64, 3, ConvSpec{1, 1, 1}) {
    this->register_child("t3", conv_t3_);
    this->register_child("t4", conv_t4_);
    this->register_child("t5", conv_t5_);
    this->register_child("low", conv_low_);
  }

  TransitionedFeatures<T> forward(const SideOutFeatures<T>& s) {
    TransitionedFeatures<T> out;
    out.t1 = upsample_bilinear(s.f1, 2);
    out.t2 = upsample_bilinear(s.f2, 4);
    out.t3 = conv_t3_.forward(upsample_bilinear(s.f3, 2));
    out.t4 = conv_t4_.forward(upsample_bilinear(s.f4, 4));
    out.t5 = conv_t5_.forward(upsample_bilinear(s.f5, 4));
    out.f_low = conv_low_.forward(concat_channels<T>({out.t1, out.t2}));
    return out;
  }

 private:
  ConvBnPRelu<T> conv_t3_;
  ConvBnPRelu<T> conv_t4_;
  ConvBnPRelu<T> conv_t5_;
  ConvBnPRelu<T> conv_low_;
};

}  // namespace cosal
