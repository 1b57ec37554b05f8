// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cosal/core/autograd.hpp"

namespace cosal {

namespace detail {

template <typename T>
void require_rank4(const Tensor<T>& t, const char* what) {
  check(t.rank() == 4, what, ": expected NCHW tensor, got rank ", t.rank());
}

}  // namespace detail

template <typename T>
Variable<T> add(const Variable<T>& a, const Variable<T>& b) {
  check(a.value().same_shape(b.value()), "add: shape mismatch ", shape_str(a.shape()), " vs ",
        shape_str(b.shape()));
  Tensor<T> out = a.value();
  out.add_(b.value());
  return make_op<T>(std::move(out), {a, b}, [a, b](GradNode<T>& self) mutable {
    a.accumulate_grad(self.grad);
    b.accumulate_grad(self.grad);
  });
}

template <typename T>
Variable<T> mul(const Variable<T>& a, const Variable<T>& b) {
  check(a.value().same_shape(b.value()), "mul: shape mismatch ", shape_str(a.shape()), " vs ",
        shape_str(b.shape()));
  Tensor<T> out = zeros_like(a.value());
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* po = out.data();
  for (std::int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] * pb[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](GradNode<T>& self) mutable {
    const T* g = self.grad.data();
    if (a.requires_grad()) {
      Tensor<T> ga = zeros_like(a.value());
      const T* pb = b.value().data();
      for (std::int64_t i = 0, n = ga.numel(); i < n; ++i) ga[i] = g[i] * pb[i];
      a.accumulate_grad(std::move(ga));
    }
    if (b.requires_grad()) {
      Tensor<T> gb = zeros_like(b.value());
      const T* pa = a.value().data();
      for (std::int64_t i = 0, n = gb.numel(); i < n; ++i) gb[i] = g[i] * pa[i];
      b.accumulate_grad(std::move(gb));
    }
  });
}

template <typename T>
Variable<T> scale(const Variable<T>& a, double s) {
  Tensor<T> out = zeros_like(a.value());
  const T* pa = a.value().data();
  T* po = out.data();
  const T ts = static_cast<T>(s);
  for (std::int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] * ts;
  return make_op<T>(std::move(out), {a}, [a, ts](GradNode<T>& self) mutable {
    Tensor<T> ga = zeros_like(a.value());
    const T* g = self.grad.data();
    for (std::int64_t i = 0, n = ga.numel(); i < n; ++i) ga[i] = g[i] * ts;
    a.accumulate_grad(std::move(ga));
  });
}

/// x[N,C,H,W] * att[N,1,H,W], attention broadcast over channels.
template <typename T>
Variable<T> mul_spatial_map(const Variable<T>& x, const Variable<T>& att) {
  detail::require_rank4(x.value(), "mul_spatial_map");
  detail::require_rank4(att.value(), "mul_spatial_map");
  const auto& xs = x.shape();
  const auto& as = att.shape();
  check(as[1] == 1 && as[0] == xs[0] && as[2] == xs[2] && as[3] == xs[3],
        "mul_spatial_map: attention ", shape_str(as), " does not broadcast over ", shape_str(xs));
  const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
  Tensor<T> out = zeros_like(x.value());
  {
    const T* px = x.value().data();
    const T* pm = att.value().data();
    T* po = out.data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const T* m = pm + n * HW;
        const T* xi = px + (n * C + c) * HW;
        T* o = po + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) o[i] = xi[i] * m[i];
      }
  }
  return make_op<T>(std::move(out), {x, att}, [x, att, N, C, HW](GradNode<T>& self) mutable {
    const T* g = self.grad.data();
    if (x.requires_grad()) {
      Tensor<T> gx = zeros_like(x.value());
      const T* pm = att.value().data();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
          const T* m = pm + n * HW;
          const T* gi = g + (n * C + c) * HW;
          T* o = gx.data() + (n * C + c) * HW;
          for (std::int64_t i = 0; i < HW; ++i) o[i] = gi[i] * m[i];
        }
      x.accumulate_grad(std::move(gx));
    }
    if (att.requires_grad()) {
      Tensor<T> gm = zeros_like(att.value());
      const T* px = x.value().data();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
          T* o = gm.data() + n * HW;
          const T* gi = g + (n * C + c) * HW;
          const T* xi = px + (n * C + c) * HW;
          for (std::int64_t i = 0; i < HW; ++i) o[i] += gi[i] * xi[i];
        }
      att.accumulate_grad(std::move(gm));
    }
  });
}

/// x[N,C,H,W] * gate[N,C,1,1], per-channel gate broadcast over space.
template <typename T>
Variable<T> mul_channel_gate(const Variable<T>& x, const Variable<T>& gate) {
  detail::require_rank4(x.value(), "mul_channel_gate");
  detail::require_rank4(gate.value(), "mul_channel_gate");
  const auto& xs = x.shape();
  const auto& gs = gate.shape();
  check(gs[0] == xs[0] && gs[1] == xs[1] && gs[2] == 1 && gs[3] == 1,
        "mul_channel_gate: gate ", shape_str(gs), " does not broadcast over ", shape_str(xs));
  const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
  Tensor<T> out = zeros_like(x.value());
  {
    const T* px = x.value().data();
    const T* pg = gate.value().data();
    T* po = out.data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const T s = pg[n * C + c];
        const T* xi = px + (n * C + c) * HW;
        T* o = po + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) o[i] = xi[i] * s;
      }
  }
  return make_op<T>(std::move(out), {x, gate}, [x, gate, N, C, HW](GradNode<T>& self) mutable {
    const T* g = self.grad.data();
    if (x.requires_grad()) {
      Tensor<T> gx = zeros_like(x.value());
      const T* pg = gate.value().data();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
          const T s = pg[n * C + c];
          const T* gi = g + (n * C + c) * HW;
          T* o = gx.data() + (n * C + c) * HW;
          for (std::int64_t i = 0; i < HW; ++i) o[i] = gi[i] * s;
        }
      x.accumulate_grad(std::move(gx));
    }
    if (gate.requires_grad()) {
      Tensor<T> gg = zeros_like(gate.value());
      const T* px = x.value().data();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
          const T* gi = g + (n * C + c) * HW;
          const T* xi = px + (n * C + c) * HW;
          T acc = 0;
          for (std::int64_t i = 0; i < HW; ++i) acc += gi[i] * xi[i];
          gg[n * C + c] = acc;
        }
      gate.accumulate_grad(std::move(gg));
    }
  });
}

/// att (x) x + x — the identity-mapping attention used throughout the heads
/// and the fusion stage. Exact for att == 0 (returns x bitwise).
template <typename T>
Variable<T> spatial_attention_residual(const Variable<T>& x, const Variable<T>& att) {
  return add(mul_spatial_map(x, att), x);
}

template <typename T>
Variable<T> channel_attention_residual(const Variable<T>& x, const Variable<T>& gate) {
  return add(mul_channel_gate(x, gate), x);
}

template <typename T>
Variable<T> concat_channels(const std::vector<Variable<T>>& parts) {
  check(!parts.empty(), "concat_channels: no inputs");
  const auto& s0 = parts[0].shape();
  detail::require_rank4(parts[0].value(), "concat_channels");
  std::int64_t C = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    check(s.size() == 4 && s[0] == s0[0] && s[2] == s0[2] && s[3] == s0[3],
          "concat_channels: incompatible shape ", shape_str(s), " vs ", shape_str(s0));
    C += s[1];
  }
  const std::int64_t N = s0[0], HW = s0[2] * s0[3];
  Tensor<T> out(Shape{N, C, s0[2], s0[3]});
  std::int64_t off = 0;
  for (const auto& p : parts) {
    const std::int64_t pc = p.shape()[1];
    const T* src = p.value().data();
    for (std::int64_t n = 0; n < N; ++n)
      std::copy(src + n * pc * HW, src + (n + 1) * pc * HW,
                out.data() + (n * C + off) * HW);
    off += pc;
  }
  return make_op<T>(std::move(out), parts, [parts, N, C, HW](GradNode<T>& self) mutable {
    const T* g = self.grad.data();
    std::int64_t off = 0;
    for (auto& p : parts) {
      const std::int64_t pc = p.shape()[1];
      if (p.requires_grad()) {
        Tensor<T> gp = zeros_like(p.value());
        for (std::int64_t n = 0; n < N; ++n)
          std::copy(g + (n * C + off) * HW, g + (n * C + off + pc) * HW,
                    gp.data() + n * pc * HW);
        p.accumulate_grad(std::move(gp));
      }
      off += pc;
    }
  });
}

/// Extract channel c0 as an [N,1,H,W] map.
template <typename T>
Variable<T> select_channel(const Variable<T>& x, std::int64_t c0) {
  detail::require_rank4(x.value(), "select_channel");
  const auto& s = x.shape();
  check(c0 >= 0 && c0 < s[1], "select_channel: channel ", c0, " out of ", s[1]);
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out(Shape{N, 1, s[2], s[3]});
  for (std::int64_t n = 0; n < N; ++n)
    std::copy(x.value().data() + (n * C + c0) * HW, x.value().data() + (n * C + c0 + 1) * HW,
              out.data() + n * HW);
  return make_op<T>(std::move(out), {x}, [x, c0, N, C, HW](GradNode<T>& self) mutable {
    Tensor<T> gx = zeros_like(x.value());
    const T* g = self.grad.data();
    for (std::int64_t n = 0; n < N; ++n)
      std::copy(g + n * HW, g + (n + 1) * HW, gx.data() + (n * C + c0) * HW);
    x.accumulate_grad(std::move(gx));
  });
}

/// Numerically stable softmax over the channel dimension of an NCHW tensor.
template <typename T>
Variable<T> softmax_channels(const Variable<T>& x) {
  detail::require_rank4(x.value(), "softmax_channels");
  const auto& s = x.shape();
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out = zeros_like(x.value());
  {
    const T* px = x.value().data();
    T* po = out.data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t i = 0; i < HW; ++i) {
        T mx = px[(n * C) * HW + i];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, px[(n * C + c) * HW + i]);
        T denom = 0;
        for (std::int64_t c = 0; c < C; ++c) {
          const T e = std::exp(px[(n * C + c) * HW + i] - mx);
          po[(n * C + c) * HW + i] = e;
          denom += e;
        }
        for (std::int64_t c = 0; c < C; ++c) po[(n * C + c) * HW + i] /= denom;
      }
  }
  Variable<T> result = make_op<T>(std::move(out), {x}, [x, N, C, HW](GradNode<T>& self) mutable {
    Tensor<T> gx = zeros_like(x.value());
    const T* g = self.grad.data();
    const T* y = self.value.data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t i = 0; i < HW; ++i) {
        T dot = 0;
        for (std::int64_t c = 0; c < C; ++c)
          dot += g[(n * C + c) * HW + i] * y[(n * C + c) * HW + i];
        for (std::int64_t c = 0; c < C; ++c) {
          const std::int64_t k = (n * C + c) * HW + i;
          gx[k] = y[k] * (g[k] - dot);
        }
      }
    x.accumulate_grad(std::move(gx));
  });
  return result;
}

template <typename T>
Variable<T> relu(const Variable<T>& x) {
  Tensor<T> out = zeros_like(x.value());
  const T* px = x.value().data();
  T* po = out.data();
  for (std::int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
  return make_op<T>(std::move(out), {x}, [x](GradNode<T>& self) mutable {
    Tensor<T> gx = zeros_like(x.value());
    const T* g = self.grad.data();
    const T* px = x.value().data();
    for (std::int64_t i = 0, n = gx.numel(); i < n; ++i) gx[i] = px[i] > T(0) ? g[i] : T(0);
    x.accumulate_grad(std::move(gx));
  });
}

/// PReLU with one learnable slope shared across the layer (shape {1}).
template <typename T>
Variable<T> prelu(const Variable<T>& x, const Variable<T>& slope) {
  check<ConfigError>(slope.value().numel() == 1, "prelu: slope must be a single parameter");
  const T a = slope.value()[0];
  Tensor<T> out = zeros_like(x.value());
  const T* px = x.value().data();
  T* po = out.data();
  for (std::int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = px[i] > T(0) ? px[i] : a * px[i];
  return make_op<T>(std::move(out), {x, slope}, [x, slope, a](GradNode<T>& self) mutable {
    const T* g = self.grad.data();
    const T* px = x.value().data();
    if (x.requires_grad()) {
      Tensor<T> gx = zeros_like(x.value());
      for (std::int64_t i = 0, n = gx.numel(); i < n; ++i)
        gx[i] = px[i] > T(0) ? g[i] : a * g[i];
      x.accumulate_grad(std::move(gx));
    }
    if (slope.requires_grad()) {
      T acc = 0;
      for (std::int64_t i = 0, n = x.value().numel(); i < n; ++i)
        if (px[i] <= T(0)) acc += g[i] * px[i];
      slope.accumulate_grad(Tensor<T>::scalar(acc));
    }
  });
}

template <typename T>
Variable<T> max_pool2d(const Variable<T>& x, int kernel, int stride, int padding) {
  detail::require_rank4(x.value(), "max_pool2d");
  const auto& s = x.shape();
  const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  const std::int64_t Ho = (H + 2 * padding - kernel) / stride + 1;
  const std::int64_t Wo = (W + 2 * padding - kernel) / stride + 1;
  check(Ho >= 1 && Wo >= 1, "max_pool2d: output would be empty for input ", shape_str(s));
  Tensor<T> out(Shape{N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(out.numel()));
  {
    const T* px = x.value().data();
    T* po = out.data();
    std::int64_t o = 0;
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const T* plane = px + (n * C + c) * H * W;
        for (std::int64_t oh = 0; oh < Ho; ++oh)
          for (std::int64_t ow = 0; ow < Wo; ++ow, ++o) {
            T best = std::numeric_limits<T>::lowest();
            std::int64_t besti = -1;
            for (int ky = 0; ky < kernel; ++ky) {
              const std::int64_t ih = oh * stride - padding + ky;
              if (ih < 0 || ih >= H) continue;
              for (int kx = 0; kx < kernel; ++kx) {
                const std::int64_t iw = ow * stride - padding + kx;
                if (iw < 0 || iw >= W) continue;
                const T v = plane[ih * W + iw];
                if (v > best) {
                  best = v;
                  besti = (n * C + c) * H * W + ih * W + iw;
                }
              }
            }
            po[o] = best;
            (*argmax)[static_cast<std::size_t>(o)] = besti;
          }
      }
  }
  return make_op<T>(std::move(out), {x}, [x, argmax](GradNode<T>& self) mutable {
    Tensor<T> gx = zeros_like(x.value());
    const T* g = self.grad.data();
    for (std::int64_t i = 0, n = self.grad.numel(); i < n; ++i)
      gx[(*argmax)[static_cast<std::size_t>(i)]] += g[i];
    x.accumulate_grad(std::move(gx));
  });
}

/// Spatial mean pooling to [N,C,1,1].
template <typename T>
Variable<T> global_avg_pool(const Variable<T>& x) {
  detail::require_rank4(x.value(), "global_avg_pool");
  const auto& s = x.shape();
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out(Shape{N, C, 1, 1});
  const T* px = x.value().data();
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    T acc = 0;
    for (std::int64_t i = 0; i < HW; ++i) acc += px[nc * HW + i];
    out[nc] = acc / static_cast<T>(HW);
  }
  return make_op<T>(std::move(out), {x}, [x, N, C, HW](GradNode<T>& self) mutable {
    Tensor<T> gx = zeros_like(x.value());
    const T* g = self.grad.data();
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
      const T v = g[nc] / static_cast<T>(HW);
      for (std::int64_t i = 0; i < HW; ++i) gx[nc * HW + i] = v;
    }
    x.accumulate_grad(std::move(gx));
  });
}

namespace detail {

struct LerpIndex {
  std::int64_t lo;
  std::int64_t hi;
  double w_hi;
};

inline std::vector<LerpIndex> bilinear_axis(std::int64_t out_len, std::int64_t in_len,
                                            double scale /* in/out */) {
  std::vector<LerpIndex> idx(static_cast<std::size_t>(out_len));
  for (std::int64_t o = 0; o < out_len; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    const auto lo = static_cast<std::int64_t>(src);
    const std::int64_t hi = lo < in_len - 1 ? lo + 1 : lo;
    idx[static_cast<std::size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return idx;
}

}  // namespace detail

/// Bilinear upsampling by an integer factor, corner alignment disabled.
template <typename T>
Variable<T> upsample_bilinear(const Variable<T>& x, int factor) {
  detail::require_rank4(x.value(), "upsample_bilinear");
  check<ConfigError>(factor >= 1, "upsample_bilinear: factor must be >= 1, got ", factor);
  if (factor == 1) return x;
  const auto& s = x.shape();
  const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  const std::int64_t Ho = H * factor, Wo = W * factor;
  const double scale = 1.0 / factor;
  auto rows = detail::bilinear_axis(Ho, H, scale);
  auto cols = detail::bilinear_axis(Wo, W, scale);
  Tensor<T> out(Shape{N, C, Ho, Wo});
  {
    const T* px = x.value().data();
    T* po = out.data();
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
      const T* plane = px + nc * H * W;
      T* oplane = po + nc * Ho * Wo;
      for (std::int64_t oh = 0; oh < Ho; ++oh) {
        const auto& r = rows[static_cast<std::size_t>(oh)];
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          const auto& c = cols[static_cast<std::size_t>(ow)];
          const double v00 = plane[r.lo * W + c.lo];
          const double v01 = plane[r.lo * W + c.hi];
          const double v10 = plane[r.hi * W + c.lo];
          const double v11 = plane[r.hi * W + c.hi];
          const double top = v00 + (v01 - v00) * c.w_hi;
          const double bot = v10 + (v11 - v10) * c.w_hi;
          oplane[oh * Wo + ow] = static_cast<T>(top + (bot - top) * r.w_hi);
        }
      }
    }
  }
  return make_op<T>(std::move(out), {x},
                    [x, rows, cols, N, C, H, W, Ho, Wo](GradNode<T>& self) mutable {
                      Tensor<T> gx = zeros_like(x.value());
                      const T* g = self.grad.data();
                      for (std::int64_t nc = 0; nc < N * C; ++nc) {
                        T* gplane = gx.data() + nc * H * W;
                        const T* goplane = g + nc * Ho * Wo;
                        for (std::int64_t oh = 0; oh < Ho; ++oh) {
                          const auto& r = rows[static_cast<std::size_t>(oh)];
                          for (std::int64_t ow = 0; ow < Wo; ++ow) {
                            const auto& c = cols[static_cast<std::size_t>(ow)];
                            const double gv = goplane[oh * Wo + ow];
                            gplane[r.lo * W + c.lo] +=
                                static_cast<T>(gv * (1 - r.w_hi) * (1 - c.w_hi));
                            gplane[r.lo * W + c.hi] += static_cast<T>(gv * (1 - r.w_hi) * c.w_hi);
                            gplane[r.hi * W + c.lo] += static_cast<T>(gv * r.w_hi * (1 - c.w_hi));
                            gplane[r.hi * W + c.hi] += static_cast<T>(gv * r.w_hi * c.w_hi);
                          }
                        }
                      }
                      x.accumulate_grad(std::move(gx));
                    });
}

template <typename T>
Variable<T> sum_all(const Variable<T>& x) {
  T acc = 0;
  const T* px = x.value().data();
  for (std::int64_t i = 0, n = x.value().numel(); i < n; ++i) acc += px[i];
  return make_op<T>(Tensor<T>::scalar(acc), {x}, [x](GradNode<T>& self) mutable {
    Tensor<T> gx = Tensor<T>::full(x.value().shape(), self.grad[0]);
    x.accumulate_grad(std::move(gx));
  });
}

template <typename T>
Variable<T> mean_all(const Variable<T>& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().numel()));
}

/// Batch normalization over (N,H,W) per channel. Training mode normalizes
/// with batch statistics and updates the running buffers (single-writer);
/// eval mode applies the affine transform from the running buffers.
template <typename T>
Variable<T> batch_norm(const Variable<T>& x, const Variable<T>& gamma, const Variable<T>& beta,
                       Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                       double momentum = 0.1, double eps = 1e-5) {
  detail::require_rank4(x.value(), "batch_norm");
  const auto& s = x.shape();
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  check(gamma.value().numel() == C && beta.value().numel() == C &&
            running_mean.numel() == C && running_var.numel() == C,
        "batch_norm: parameter size mismatch for ", C, " channels");
  const std::int64_t m = N * HW;

  std::vector<T> mean_c(static_cast<std::size_t>(C)), invstd_c(static_cast<std::size_t>(C));
  if (training) {
    for (std::int64_t c = 0; c < C; ++c) {
      double acc = 0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* p = x.value().data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(m);
      double var = 0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* p = x.value().data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
          const double d = p[i] - mu;
          var += d * d;
        }
      }
      var /= static_cast<double>(m);
      mean_c[static_cast<std::size_t>(c)] = static_cast<T>(mu);
      invstd_c[static_cast<std::size_t>(c)] = static_cast<T>(1.0 / std::sqrt(var + eps));
      running_mean[c] = static_cast<T>((1 - momentum) * running_mean[c] + momentum * mu);
      const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      running_var[c] = static_cast<T>((1 - momentum) * running_var[c] + momentum * unbiased);
    }
  } else {
    for (std::int64_t c = 0; c < C; ++c) {
      mean_c[static_cast<std::size_t>(c)] = running_mean[c];
      invstd_c[static_cast<std::size_t>(c)] =
          static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
    }
  }

  Tensor<T> out = zeros_like(x.value());
  {
    const T* px = x.value().data();
    T* po = out.data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const T mu = mean_c[static_cast<std::size_t>(c)];
        const T is = invstd_c[static_cast<std::size_t>(c)];
        const T gm = gamma.value()[c];
        const T bt = beta.value()[c];
        const T* xi = px + (n * C + c) * HW;
        T* o = po + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) o[i] = (xi[i] - mu) * is * gm + bt;
      }
  }

  return make_op<T>(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean_c, invstd_c, training, N, C, HW, m](GradNode<T>& self) mutable {
        const T* g = self.grad.data();
        const T* px = x.value().data();
        // Per-channel reductions shared by all three gradients.
        std::vector<double> sum_g(static_cast<std::size_t>(C), 0.0);
        std::vector<double> sum_gx(static_cast<std::size_t>(C), 0.0);  // sum g * xhat
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c) {
            const T mu = mean_c[static_cast<std::size_t>(c)];
            const T is = invstd_c[static_cast<std::size_t>(c)];
            const T* xi = px + (n * C + c) * HW;
            const T* gi = g + (n * C + c) * HW;
            double sg = 0, sgx = 0;
            for (std::int64_t i = 0; i < HW; ++i) {
              sg += gi[i];
              sgx += gi[i] * ((xi[i] - mu) * is);
            }
            sum_g[static_cast<std::size_t>(c)] += sg;
            sum_gx[static_cast<std::size_t>(c)] += sgx;
          }
        if (gamma.requires_grad()) {
          Tensor<T> gg = zeros_like(gamma.value());
          for (std::int64_t c = 0; c < C; ++c) gg[c] = static_cast<T>(sum_gx[static_cast<std::size_t>(c)]);
          gamma.accumulate_grad(std::move(gg));
        }
        if (beta.requires_grad()) {
          Tensor<T> gb = zeros_like(beta.value());
          for (std::int64_t c = 0; c < C; ++c) gb[c] = static_cast<T>(sum_g[static_cast<std::size_t>(c)]);
          beta.accumulate_grad(std::move(gb));
        }
        if (x.requires_grad()) {
          Tensor<T> gx = zeros_like(x.value());
          for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t c = 0; c < C; ++c) {
              const T mu = mean_c[static_cast<std::size_t>(c)];
              const T is = invstd_c[static_cast<std::size_t>(c)];
              const T gm = gamma.value()[c];
              const T* xi = px + (n * C + c) * HW;
              const T* gi = g + (n * C + c) * HW;
              T* o = gx.data() + (n * C + c) * HW;
              if (training) {
                const double mg = sum_g[static_cast<std::size_t>(c)] / static_cast<double>(m);
                const double mgx = sum_gx[static_cast<std::size_t>(c)] / static_cast<double>(m);
                for (std::int64_t i = 0; i < HW; ++i) {
                  const double xhat = (xi[i] - mu) * is;
                  o[i] = static_cast<T>(gm * is * (gi[i] - mg - xhat * mgx));
                }
              } else {
                for (std::int64_t i = 0; i < HW; ++i) o[i] = static_cast<T>(gm * is * gi[i]);
              }
            }
          x.accumulate_grad(std::move(gx));
        }
      });
}

}  // namespace cosal
