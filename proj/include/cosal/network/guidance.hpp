// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <random>
#include <vector>

#include "cosal/core/nn.hpp"

namespace cosal {

/// Parallel multi-rate context block: four dilated 3x3 branches (rates 1, 6,
/// 12, 18), one 1x1 branch, concatenated and fused back to 64 channels by a
/// 1x1 convolution. Every branch preserves spatial size (padding = rate).
template <typename T>
class DilatedContextBlock : public Module<T> {
 public:
  explicit DilatedContextBlock(std::mt19937_64& rng, int channels = 64)
      : d1_(rng, channels, channels, 3, ConvSpec{1, 1, 1}),
        d6_(rng, channels, channels, 3, ConvSpec{1, 6, 6}),
        d12_(rng, channels, channels, 3, ConvSpec{1, 12, 12}),
        d18_(rng, channels, channels, 3, ConvSpec{1, 18, 18}),
        p1_(rng, channels, channels, 1, ConvSpec{1, 0, 1}),
        fuse_(rng, channels * 5, channels, 1, ConvSpec{1, 0, 1}) {
    this->register_child("d1", d1_);
    this->register_child("d6", d6_);
    this->register_child("d12", d12_);
    this->register_child("d18", d18_);
    this->register_child("p1", p1_);
    this->register_child("fuse", fuse_);
  }

  Variable<T> forward(const Variable<T>& x) {
    auto b1 = d1_.forward(x);
    auto b2 = d6_.forward(x);
    auto b3 = d12_.forward(x);
    auto b4 = d18_.forward(x);
    auto b5 = p1_.forward(x);
    return fuse_.forward(concat_channels<T>({b1, b2, b3, b4, b5}));
  }

  ConvBnPRelu<T>& d1() { return d1_; }
  ConvBnPRelu<T>& d6() { return d6_; }
  ConvBnPRelu<T>& d12() { return d12_; }
  ConvBnPRelu<T>& d18() { return d18_; }
  ConvBnPRelu<T>& p1() { return p1_; }
  ConvBnPRelu<T>& fuse() { return fuse_; }

 private:
  ConvBnPRelu<T> d1_, d6_, d12_, d18_, p1_;
  ConvBnPRelu<T> fuse_;
};

template <typename T>
struct GuidanceOutputs {
  Variable<T> f3_tilde, f4_tilde, f5_tilde;  // input_side/4, 64 channels
  Variable<T> f_high;                        // input_side, 64 channels
};

/// Top-down recursion over the three high-level transitions: each level is
/// refined by a context block fed with its own feature plus all deeper
/// refined outputs, then the three results are concatenated, projected by a
/// plain 1x1 convolution and upsampled x4. With use_context=false the
/// refinement is the identity and only the projection remains (the
/// backbone+concat baseline).
template <typename T>
class GlobalGuidance : public Module<T> {
 public:
  GlobalGuidance(std::mt19937_64& rng, bool use_context, int channels = 64)
      : project_(rng, channels * 3, channels, 1, ConvSpec{1, 0, 1}, true) {
    if (use_context) {
      ctx3_.emplace(rng, channels);
      ctx4_.emplace(rng, channels);
      ctx5_.emplace(rng, channels);
      this->register_child("ctx3", *ctx3_);
      this->register_child("ctx4", *ctx4_);
      this->register_child("ctx5", *ctx5_);
    }
    this->register_child("project", project_);
  }

  bool has_context() const { return ctx5_.has_value(); }

  /// Test hook: records the level order in which context blocks run.
  void set_call_log(std::vector<int>* log) { call_log_ = log; }

  GuidanceOutputs<T> forward(const Variable<T>& t3, const Variable<T>& t4,
                             const Variable<T>& t5) {
    check(t3.value().same_shape(t4.value()) && t4.value().same_shape(t5.value()),
          "global guidance: t3/t4/t5 must share shape, got ", shape_str(t3.shape()), " ",
          shape_str(t4.shape()), " ", shape_str(t5.shape()));
    GuidanceOutputs<T> out;
    if (ctx5_) {
      out.f5_tilde = refine(*ctx5_, 5, t5);
      out.f4_tilde = refine(*ctx4_, 4, add(t4, out.f5_tilde));
      out.f3_tilde = refine(*ctx3_, 3, add(t3, add(out.f4_tilde, out.f5_tilde)));
    } else {
      out.f5_tilde = t5;
      out.f4_tilde = t4;
      out.f3_tilde = t3;
    }
    auto fused = project_.forward(concat_channels<T>({out.f3_tilde, out.f4_tilde, out.f5_tilde}));
    out.f_high = upsample_bilinear(fused, 4);
    return out;
  }

  Conv2d<T>& projection() { return project_; }
  DilatedContextBlock<T>& context(int level) {
    check<ConfigError>(ctx5_.has_value(), "global guidance: context blocks disabled");
    switch (level) {
      case 3: return *ctx3_;
      case 4: return *ctx4_;
      default: return *ctx5_;
    }
  }

 private:
  Variable<T> refine(DilatedContextBlock<T>& ctx, int level, const Variable<T>& x) {
    if (call_log_) call_log_->push_back(level);
    return ctx.forward(x);
  }

  std::optional<DilatedContextBlock<T>> ctx3_, ctx4_, ctx5_;
  Conv2d<T> project_;
  std::vector<int>* call_log_ = nullptr;
};

}  // namespace cosal
