// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cosal/core/autograd.hpp"

namespace cosal {

struct ConvSpec {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

namespace detail {

// The unrolled patch matrix for one batch item is built in row tiles so the
// scratch buffer stays bounded (~32 MB of float) even for the widest layers.
inline constexpr std::int64_t kConvTileElems = std::int64_t(1) << 23;

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

struct ConvDims {
  std::int64_t N, Cin, H, W;
  std::int64_t Cout, kh, kw;
  std::int64_t Ho, Wo;
  std::int64_t k;  // Cin * kh * kw
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec) {
  check(x.rank() == 4, "conv2d: input must be NCHW, got rank ", x.rank());
  check(w.rank() == 4, "conv2d: weight must be [outC,inC,kh,kw], got rank ", w.rank());
  check(x.dim(1) == w.dim(1), "conv2d: input channels ", x.dim(1),
        " do not match weight channels ", w.dim(1));
  check<ConfigError>(spec.stride >= 1 && spec.dilation >= 1 && spec.padding >= 0,
                     "conv2d: invalid stride/padding/dilation");
  ConvDims d;
  d.N = x.dim(0);
  d.Cin = x.dim(1);
  d.H = x.dim(2);
  d.W = x.dim(3);
  d.Cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  const std::int64_t eff_h = spec.dilation * (d.kh - 1) + 1;
  const std::int64_t eff_w = spec.dilation * (d.kw - 1) + 1;
  d.Ho = (d.H + 2 * spec.padding - eff_h) / spec.stride + 1;
  d.Wo = (d.W + 2 * spec.padding - eff_w) / spec.stride + 1;
  check(d.Ho >= 1 && d.Wo >= 1, "conv2d: output would be empty for input ", shape_str(x.shape()));
  d.k = d.Cin * d.kh * d.kw;
  return d;
}

/// Fill the column buffer for output rows [r0, r1) of batch item n.
/// Layout: column j = (oh - r0) * Wo + ow holds the k-vector of input taps,
/// stored column-major so each patch is contiguous.
template <typename T>
void im2col_tile(const T* x, const ConvDims& d, const ConvSpec& spec, std::int64_t n,
                 std::int64_t r0, std::int64_t r1, T* col) {
  const std::int64_t m = (r1 - r0) * d.Wo;
  for (std::int64_t oh = r0; oh < r1; ++oh)
    for (std::int64_t ow = 0; ow < d.Wo; ++ow) {
      T* dst = col + ((oh - r0) * d.Wo + ow) * d.k;
      std::int64_t r = 0;
      for (std::int64_t ci = 0; ci < d.Cin; ++ci) {
        const T* plane = x + (n * d.Cin + ci) * d.H * d.W;
        for (std::int64_t ky = 0; ky < d.kh; ++ky) {
          const std::int64_t ih = oh * spec.stride - spec.padding + ky * spec.dilation;
          if (ih < 0 || ih >= d.H) {
            for (std::int64_t kx = 0; kx < d.kw; ++kx) dst[r++] = T(0);
            continue;
          }
          for (std::int64_t kx = 0; kx < d.kw; ++kx) {
            const std::int64_t iw = ow * spec.stride - spec.padding + kx * spec.dilation;
            dst[r++] = (iw >= 0 && iw < d.W) ? plane[ih * d.W + iw] : T(0);
          }
        }
      }
    }
  (void)m;
}

/// Scatter-add the column-gradient buffer back onto the input gradient.
template <typename T>
void col2im_tile(const T* col, const ConvDims& d, const ConvSpec& spec, std::int64_t n,
                 std::int64_t r0, std::int64_t r1, T* gx) {
  for (std::int64_t oh = r0; oh < r1; ++oh)
    for (std::int64_t ow = 0; ow < d.Wo; ++ow) {
      const T* src = col + ((oh - r0) * d.Wo + ow) * d.k;
      std::int64_t r = 0;
      for (std::int64_t ci = 0; ci < d.Cin; ++ci) {
        T* plane = gx + (n * d.Cin + ci) * d.H * d.W;
        for (std::int64_t ky = 0; ky < d.kh; ++ky) {
          const std::int64_t ih = oh * spec.stride - spec.padding + ky * spec.dilation;
          if (ih < 0 || ih >= d.H) {
            r += d.kw;
            continue;
          }
          for (std::int64_t kx = 0; kx < d.kw; ++kx) {
            const std::int64_t iw = ow * spec.stride - spec.padding + kx * spec.dilation;
            if (iw >= 0 && iw < d.W) plane[ih * d.W + iw] += src[r];
            ++r;
          }
        }
      }
    }
}

template <typename T>
std::int64_t conv_tile_rows(const ConvDims& d) {
  const std::int64_t per_row = d.k * d.Wo;
  std::int64_t rows = per_row > 0 ? kConvTileElems / per_row : d.Ho;
  return std::max<std::int64_t>(1, std::min(rows, d.Ho));
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvSpec& spec) {
  const auto d = detail::conv_dims(x, w, spec);
  if (bias)
    check(bias->numel() == d.Cout, "conv2d: bias size ", bias->numel(), " vs out channels ",
          d.Cout);
  Tensor<T> out(Shape{d.N, d.Cout, d.Ho, d.Wo});
  const std::int64_t tile = detail::conv_tile_rows<T>(d);
  std::vector<T> col(static_cast<std::size_t>(d.k * tile * d.Wo));
  Eigen::Map<const detail::MatRM<T>> W(w.data(), d.Cout, d.k);
  for (std::int64_t n = 0; n < d.N; ++n)
    for (std::int64_t r0 = 0; r0 < d.Ho; r0 += tile) {
      const std::int64_t r1 = std::min(d.Ho, r0 + tile);
      const std::int64_t m = (r1 - r0) * d.Wo;
      detail::im2col_tile(x.data(), d, spec, n, r0, r1, col.data());
      Eigen::Map<const detail::MatCM<T>> Col(col.data(), d.k, m);
      Eigen::Map<detail::MatRM<T>, 0, Eigen::OuterStride<>> Out(
          out.data() + (n * d.Cout * d.Ho + r0) * d.Wo, d.Cout, m,
          Eigen::OuterStride<>(d.Ho * d.Wo));
      Out.noalias() = W * Col;
    }
  if (bias) {
    T* po = out.data();
    for (std::int64_t n = 0; n < d.N; ++n)
      for (std::int64_t c = 0; c < d.Cout; ++c) {
        const T b = (*bias)[c];
        T* plane = po + (n * d.Cout + c) * d.Ho * d.Wo;
        for (std::int64_t i = 0; i < d.Ho * d.Wo; ++i) plane[i] += b;
      }
  }
  return out;
}

/// Computes whichever gradients are requested (non-null outputs must be
/// zero-initialized to the matching shape; gw/gb are accumulated into).
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec,
                     const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const auto d = detail::conv_dims(x, w, spec);
  check(gout.rank() == 4 && gout.dim(0) == d.N && gout.dim(1) == d.Cout &&
            gout.dim(2) == d.Ho && gout.dim(3) == d.Wo,
        "conv2d_backward: upstream gradient shape ", shape_str(gout.shape()), " mismatch");
  if (gb) {
    for (std::int64_t n = 0; n < d.N; ++n)
      for (std::int64_t c = 0; c < d.Cout; ++c) {
        const T* plane = gout.data() + (n * d.Cout + c) * d.Ho * d.Wo;
        T acc = 0;
        for (std::int64_t i = 0; i < d.Ho * d.Wo; ++i) acc += plane[i];
        (*gb)[c] += acc;
      }
  }
  if (!gx && !gw) return;
  const std::int64_t tile = detail::conv_tile_rows<T>(d);
  std::vector<T> col(static_cast<std::size_t>(d.k * tile * d.Wo));
  std::vector<T> colg;
  if (gx) colg.resize(static_cast<std::size_t>(d.k * tile * d.Wo));
  Eigen::Map<const detail::MatRM<T>> W(w.data(), d.Cout, d.k);
  for (std::int64_t n = 0; n < d.N; ++n)
    for (std::int64_t r0 = 0; r0 < d.Ho; r0 += tile) {
      const std::int64_t r1 = std::min(d.Ho, r0 + tile);
      const std::int64_t m = (r1 - r0) * d.Wo;
      Eigen::Map<const detail::MatRM<T>, 0, Eigen::OuterStride<>> GOut(
          gout.data() + (n * d.Cout * d.Ho + r0) * d.Wo, d.Cout, m,
          Eigen::OuterStride<>(d.Ho * d.Wo));
      if (gw) {
        detail::im2col_tile(x.data(), d, spec, n, r0, r1, col.data());
        Eigen::Map<const detail::MatCM<T>> Col(col.data(), d.k, m);
        Eigen::Map<detail::MatRM<T>> GW(gw->data(), d.Cout, d.k);
        GW.noalias() += GOut * Col.transpose();
      }
      if (gx) {
        Eigen::Map<detail::MatCM<T>> ColG(colg.data(), d.k, m);
        ColG.noalias() = W.transpose() * GOut;
        detail::col2im_tile(colg.data(), d, spec, n, r0, r1, gx->data());
      }
    }
}

/// Autograd wrapper. Pass an undefined bias Variable for a bias-free layer.
template <typename T>
Variable<T> conv2d(const Variable<T>& x, const Variable<T>& weight, const Variable<T>& bias,
                   const ConvSpec& spec) {
  const bool has_bias = bias.defined() && bias.value().defined();
  Tensor<T> out =
      conv2d_forward(x.value(), weight.value(), has_bias ? &bias.value() : nullptr, spec);
  std::vector<Variable<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op<T>(std::move(out), std::move(inputs),
                    [x, weight, bias, has_bias, spec](GradNode<T>& self) mutable {
                      Tensor<T> gx, gw, gb;
                      if (x.requires_grad()) gx = zeros_like(x.value());
                      if (weight.requires_grad()) gw = zeros_like(weight.value());
                      if (has_bias && bias.requires_grad()) gb = zeros_like(bias.value());
                      conv2d_backward(x.value(), weight.value(), spec, self.grad,
                                      gx.defined() ? &gx : nullptr, gw.defined() ? &gw : nullptr,
                                      gb.defined() ? &gb : nullptr);
                      if (gx.defined()) x.accumulate_grad(std::move(gx));
                      if (gw.defined()) weight.accumulate_grad(std::move(gw));
                      if (gb.defined()) bias.accumulate_grad(std::move(gb));
                    });
}

}  // namespace cosal
