// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cosal/core/ops.hpp"

namespace cosal {

enum class Reduction { kMean, kSum };

inline Reduction reduction_from_string(const std::string& s) {
  if (s == "mean") return Reduction::kMean;
  if (s == "sum") return Reduction::kSum;
  throw ConfigError(msg("unknown reduction '", s, "' (expected mean|sum)"));
}

inline const char* to_string(Reduction r) { return r == Reduction::kMean ? "mean" : "sum"; }

namespace detail {
inline constexpr double kProbClampEps = 1e-7;
}

/// Binary cross entropy on a probability map against a strictly binary
/// target. Probabilities are clamped to [eps, 1-eps] so the logs stay
/// finite; the gradient is zero on clamped pixels.
template <typename T>
Variable<T> bce_loss(const Variable<T>& pred_prob, const Tensor<T>& gt,
                     Reduction red = Reduction::kMean) {
  check(pred_prob.value().same_shape(gt), "bce_loss: shape mismatch ",
        shape_str(pred_prob.shape()), " vs ", shape_str(gt.shape()));
  const std::int64_t n = gt.numel();
  for (std::int64_t i = 0; i < n; ++i)
    check<ValidationError>(gt[i] == T(0) || gt[i] == T(1),
                           "bce_loss: ground truth must be binary, found ", gt[i], " at index ",
                           i);
  const T lo = static_cast<T>(detail::kProbClampEps);
  const T hi = static_cast<T>(1.0 - detail::kProbClampEps);
  const T* p = pred_prob.value().data();
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const T pc = std::min(std::max(p[i], lo), hi);
    acc -= gt[i] == T(1) ? std::log(static_cast<double>(pc))
                         : std::log(static_cast<double>(T(1) - pc));
  }
  const double denom = red == Reduction::kMean ? static_cast<double>(n) : 1.0;
  Tensor<T> value = Tensor<T>::scalar(static_cast<T>(acc / denom));
  return make_op<T>(std::move(value), {pred_prob},
                    [pred_prob, gt, lo, hi, denom](GradNode<T>& self) mutable {
                      Tensor<T> gp = zeros_like(pred_prob.value());
                      const T g = self.grad[0];
                      const T* p = pred_prob.value().data();
                      for (std::int64_t i = 0; i < gp.numel(); ++i) {
                        if (p[i] < lo || p[i] > hi) continue;  // clamped: flat
                        const T pc = p[i];
                        const T d = gt[i] == T(1) ? -T(1) / pc : T(1) / (T(1) - pc);
                        gp[i] = static_cast<T>(g * d / denom);
                      }
                      pred_prob.accumulate_grad(std::move(gp));
                    });
}

/// Piecewise robust regression loss: 0.5 * d^2 inside |d| <= 1, |d| - 0.5
/// outside; both branches and both derivatives agree at |d| = 1.
template <typename T>
Variable<T> smooth_l1_loss(const Variable<T>& pred, const Tensor<T>& gt,
                           Reduction red = Reduction::kMean) {
  check(pred.value().same_shape(gt), "smooth_l1_loss: shape mismatch ", shape_str(pred.shape()),
        " vs ", shape_str(gt.shape()));
  const std::int64_t n = gt.numel();
  const T* p = pred.value().data();
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = std::abs(static_cast<double>(p[i]) - static_cast<double>(gt[i]));
    acc += d <= 1.0 ? 0.5 * d * d : d - 0.5;
  }
  const double denom = red == Reduction::kMean ? static_cast<double>(n) : 1.0;
  Tensor<T> value = Tensor<T>::scalar(static_cast<T>(acc / denom));
  return make_op<T>(std::move(value), {pred}, [pred, gt, denom](GradNode<T>& self) mutable {
    Tensor<T> gp = zeros_like(pred.value());
    const T g = self.grad[0];
    const T* p = pred.value().data();
    for (std::int64_t i = 0; i < gp.numel(); ++i) {
      const T d = p[i] - gt[i];
      const T dd = d > T(1) ? T(1) : (d < T(-1) ? T(-1) : d);
      gp[i] = static_cast<T>(g * dd / denom);
    }
    pred.accumulate_grad(std::move(gp));
  });
}

struct LossWeights {
  double edge = 1.0;
  double sal = 1.0;
  double depth = 3.0;
  double final_map = 1.0;

  void validate() const {
    check<ConfigError>(edge >= 0 && sal >= 0 && depth >= 0 && final_map >= 0,
                       "loss weights must be nonnegative");
  }
};

/// Weighted total of the four supervision terms. Heads that are disabled by
/// the ablation config contribute exactly zero (their Variables are left
/// undefined by the caller).
template <typename T>
struct LossBreakdown {
  Variable<T> total;
  double edge = 0, sal = 0, depth = 0, final_map = 0;
  bool has_edge = false, has_sal = false, has_depth = false;
};

template <typename T>
LossBreakdown<T> total_loss(const Variable<T>& loss_e, const Variable<T>& loss_s,
                            const Variable<T>& loss_d, const Variable<T>& loss_f,
                            const LossWeights& w) {
  w.validate();
  check<ValidationError>(loss_f.defined(), "total_loss: the final-map term is always required");
  LossBreakdown<T> out;
  out.final_map = loss_f.value()[0];
  Variable<T> acc = scale(loss_f, w.final_map);
  if (loss_e.defined()) {
    out.has_edge = true;
    out.edge = loss_e.value()[0];
    acc = add(acc, scale(loss_e, w.edge));
  }
  if (loss_s.defined()) {
    out.has_sal = true;
    out.sal = loss_s.value()[0];
    acc = add(acc, scale(loss_s, w.sal));
  }
  if (loss_d.defined()) {
    out.has_depth = true;
    out.depth = loss_d.value()[0];
    acc = add(acc, scale(loss_d, w.depth));
  }
  out.total = acc;
  return out;
}

}  // namespace cosal
