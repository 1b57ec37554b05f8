// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cosal/core/tensor.hpp"

namespace cosal::metrics {

/// Machine epsilon of the reference implementations; pinned so scores match
/// the cited benchmark code exactly rather than drifting with local choices.
inline constexpr double kMatlabEps = 2.220446049250313e-16;

/// Per-sample score plus a validity flag; invalid means the sample was
/// skipped (empty ground truth) and must not enter the dataset average.
struct FlaggedScore {
  double value = 0.0;
  bool valid = false;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

namespace detail {

template <typename T>
void require_map_pair(const Tensor<T>& pred, const Tensor<T>& gt) {
  check(pred.rank() == 2 && gt.rank() == 2, "metrics: expected rank-2 [H,W] maps, got ranks ",
        pred.rank(), " and ", gt.rank());
  check(pred.shape() == gt.shape(), "metrics: shape mismatch ", shape_str(pred.shape()), " vs ",
        shape_str(gt.shape()));
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    check<ValidationError>(pred[i] >= T(0) && pred[i] <= T(1),
                           "metrics: prediction outside [0,1] at index ", i, ": ", pred[i]);
    check<ValidationError>(gt[i] == T(0) || gt[i] == T(1),
                           "metrics: ground truth must be binary, found ", gt[i], " at index ", i);
  }
}

template <typename T>
std::int64_t count_foreground(const Tensor<T>& gt) {
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < gt.numel(); ++i) n += (gt[i] == T(1)) ? 1 : 0;
  return n;
}

template <typename T>
double mean_of(const Tensor<T>& t) {
  double acc = 0;
  for (std::int64_t i = 0; i < t.numel(); ++i) acc += t[i];
  return acc / static_cast<double>(t.numel());
}

/// Adaptive threshold: twice the mean prediction, clipped to 1.
template <typename T>
double adaptive_threshold(const Tensor<T>& pred) {
  return std::min(2.0 * mean_of(pred), 1.0);
}

/// Binarize at the adaptive threshold (>=). An identically-zero prediction
/// yields an empty foreground (zero-recall convention) instead of the
/// degenerate all-foreground map a >= 0 test would produce.
template <typename T>
std::vector<std::uint8_t> adaptive_binarize(const Tensor<T>& pred) {
  const double t = adaptive_threshold(pred);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(pred.numel()), 0);
  if (t <= 0.0) return out;
  for (std::int64_t i = 0; i < pred.numel(); ++i)
    out[static_cast<std::size_t>(i)] = (static_cast<double>(pred[i]) >= t) ? 1 : 0;
  return out;
}

/// For every pixel, the nearest ground-truth foreground pixel under
/// (squared distance, then row-major linear index) lexicographic order.
/// Separable two-pass search: per-column nearest foreground row (ties to the
/// smaller row), then an exact scan across columns per pixel.
template <typename T>
void nearest_foreground(const Tensor<T>& gt, std::vector<std::int64_t>& index,
                        std::vector<double>& dist2) {
  const std::int64_t H = gt.dim(0), W = gt.dim(1), N = H * W;
  index.assign(static_cast<std::size_t>(N), -1);
  dist2.assign(static_cast<std::size_t>(N), 0.0);

  // best foreground row per (target row, column); -1 when the column is empty
  std::vector<std::int64_t> best_row(static_cast<std::size_t>(N), -1);
  for (std::int64_t x = 0; x < W; ++x) {
    std::int64_t last = -1;
    for (std::int64_t y = 0; y < H; ++y) {  // nearest at or above
      if (gt.at(y, x) == T(1)) last = y;
      best_row[static_cast<std::size_t>(y * W + x)] = last;
    }
    last = -1;
    for (std::int64_t y = H - 1; y >= 0; --y) {  // nearest at or below
      if (gt.at(y, x) == T(1)) last = y;
      auto& b = best_row[static_cast<std::size_t>(y * W + x)];
      if (last >= 0) {
        if (b < 0) {
          b = last;
        } else {
          const std::int64_t du = y - b, dd = last - y;
          if (dd * dd < du * du) b = last;  // tie keeps the smaller row
        }
      }
    }
  }

  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      std::int64_t bi = -1;
      std::int64_t bd = 0;
      for (std::int64_t xc = 0; xc < W; ++xc) {
        const std::int64_t r = best_row[static_cast<std::size_t>(y * W + xc)];
        if (r < 0) continue;
        const std::int64_t d = (y - r) * (y - r) + (x - xc) * (x - xc);
        const std::int64_t idx = r * W + xc;
        if (bi < 0 || d < bd || (d == bd && idx < bi)) {
          bd = d;
          bi = idx;
        }
      }
      index[static_cast<std::size_t>(y * W + x)] = bi;
      dist2[static_cast<std::size_t>(y * W + x)] = static_cast<double>(bd);
    }
}

/// 7x7 Gaussian (sigma = 5) correlation with zero padding, the pixel
/// dependency filter of the weighted-F construction.
inline void gaussian7x5(const std::vector<double>& in, std::int64_t H, std::int64_t W,
                        std::vector<double>& out) {
  double k[7][7];
  double z = 0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      k[dy + 3][dx + 3] = std::exp(-(dx * dx + dy * dy) / (2.0 * 25.0));
      z += k[dy + 3][dx + 3];
    }
  for (auto& row : k)
    for (auto& v : row) v /= z;

  out.assign(static_cast<std::size_t>(H * W), 0.0);
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      double acc = 0;
      for (int dy = -3; dy <= 3; ++dy) {
        const std::int64_t yy = y + dy;
        if (yy < 0 || yy >= H) continue;
        for (int dx = -3; dx <= 3; ++dx) {
          const std::int64_t xx = x + dx;
          if (xx < 0 || xx >= W) continue;
          acc += k[dy + 3][dx + 3] * in[static_cast<std::size_t>(yy * W + xx)];
        }
      }
      out[static_cast<std::size_t>(y * W + x)] = acc;
    }
}

/// Region similarity used by the structure measure: an SSIM-style score on
/// mean-centered statistics with N-1 normalization. Empty regions carry zero
/// weight in the caller; they score 0 here to stay well defined.
inline double region_similarity(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = static_cast<double>(p.size());
  if (p.empty()) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mx += p[i];
    my += g[i];
  }
  mx /= n;
  my /= n;
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sx += (p[i] - mx) * (p[i] - mx);
    sy += (g[i] - my) * (g[i] - my);
    sxy += (p[i] - mx) * (g[i] - my);
  }
  sx /= n - 1 + kMatlabEps;
  sy /= n - 1 + kMatlabEps;
  sxy /= n - 1 + kMatlabEps;
  const double a = 4.0 * mx * my * sxy;
  const double b = (mx * mx + my * my) * (sx + sy);
  if (a != 0.0) return a / (b + kMatlabEps);
  return (b == 0.0) ? 1.0 : 0.0;
}

/// Foreground/background similarity statistic of the object term.
inline double object_similarity(const std::vector<double>& vals) {
  if (vals.empty()) return 0.0;
  const double n = static_cast<double>(vals.size());
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= n;
  double var = 0;
  for (double v : vals) var += (v - mean) * (v - mean);
  const double sd = vals.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + kMatlabEps);
}

}  // namespace detail

/// Mean absolute error. Defined for every sample, including empty ground
/// truth.
template <typename T>
double mae(const Tensor<T>& pred, const Tensor<T>& gt) {
  detail::require_map_pair(pred, gt);
  double acc = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i)
    acc += std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));
  return acc / static_cast<double>(pred.numel());
}

/// F-measure at the adaptive threshold with beta^2 = 0.3; degenerate
/// precision/recall scores zero. Invalid on empty ground truth.
template <typename T>
FlaggedScore mean_f_measure(const Tensor<T>& pred, const Tensor<T>& gt) {
  detail::require_map_pair(pred, gt);
  const std::int64_t num_fg = detail::count_foreground(gt);
  if (num_fg == 0) return {0.0, false};
  const auto bin = detail::adaptive_binarize(pred);
  std::int64_t tp = 0, predicted = 0;
  for (std::int64_t i = 0; i < gt.numel(); ++i) {
    if (bin[static_cast<std::size_t>(i)]) {
      ++predicted;
      if (gt[i] == T(1)) ++tp;
    }
  }
  if (tp == 0) return {0.0, true};
  const double p = static_cast<double>(tp) / static_cast<double>(predicted);
  const double r = static_cast<double>(tp) / static_cast<double>(num_fg);
  constexpr double kBeta2 = 0.3;
  return {(1.0 + kBeta2) * p * r / (kBeta2 * p + r), true};
}

/// Dependency-weighted F-measure (beta^2 = 1): absolute errors are
/// propagated from the nearest foreground pixel, smoothed by a 7x7 sigma-5
/// Gaussian, reduced on the foreground where smoothing helps, and decayed on
/// the background with exp(ln(0.5)/5 * distance). Invalid on empty ground
/// truth.
template <typename T>
FlaggedScore weighted_f_measure(const Tensor<T>& pred, const Tensor<T>& gt) {
  detail::require_map_pair(pred, gt);
  const std::int64_t H = gt.dim(0), W = gt.dim(1), N = H * W;
  const std::int64_t num_fg = detail::count_foreground(gt);
  if (num_fg == 0) return {0.0, false};

  std::vector<double> err(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i)
    err[static_cast<std::size_t>(i)] =
        std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));

  std::vector<std::int64_t> nearest;
  std::vector<double> dist2;
  detail::nearest_foreground(gt, nearest, dist2);

  std::vector<double> propagated(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i)
    propagated[static_cast<std::size_t>(i)] =
        (gt[i] == T(1)) ? err[static_cast<std::size_t>(i)]
                        : err[static_cast<std::size_t>(nearest[static_cast<std::size_t>(i)])];

  std::vector<double> smoothed;
  detail::gaussian7x5(propagated, H, W, smoothed);

  double sum_fg_ew = 0, sum_bg_ew = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (gt[i] == T(1)) {
      const double e = (smoothed[u] < err[u]) ? smoothed[u] : err[u];
      sum_fg_ew += e;  // importance weight is 1 on the foreground
    } else {
      const double decay = 2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt(dist2[u]));
      sum_bg_ew += err[u] * decay;
    }
  }

  const double tpw = static_cast<double>(num_fg) - sum_fg_ew;
  const double fpw = sum_bg_ew;
  const double recall = 1.0 - sum_fg_ew / static_cast<double>(num_fg);
  const double precision = tpw / (kMatlabEps + tpw + fpw);
  return {2.0 * recall * precision / (kMatlabEps + recall + precision), true};
}

/// Structure measure: 0.5 * object term + 0.5 * region term. All-background
/// ground truth falls back to 1 - mean(pred); all-foreground to mean(pred).
template <typename T>
double s_measure(const Tensor<T>& pred, const Tensor<T>& gt) {
  detail::require_map_pair(pred, gt);
  const std::int64_t H = gt.dim(0), W = gt.dim(1), N = H * W;
  const std::int64_t num_fg = detail::count_foreground(gt);
  if (num_fg == 0) return 1.0 - detail::mean_of(pred);
  if (num_fg == N) return detail::mean_of(pred);

  // object term
  std::vector<double> fg_vals, bg_vals;
  fg_vals.reserve(static_cast<std::size_t>(num_fg));
  bg_vals.reserve(static_cast<std::size_t>(N - num_fg));
  for (std::int64_t i = 0; i < N; ++i) {
    if (gt[i] == T(1))
      fg_vals.push_back(static_cast<double>(pred[i]));
    else
      bg_vals.push_back(1.0 - static_cast<double>(pred[i]));
  }
  const double mu = static_cast<double>(num_fg) / static_cast<double>(N);
  const double s_object =
      mu * detail::object_similarity(fg_vals) + (1.0 - mu) * detail::object_similarity(bg_vals);

  // region term: split about the rounded foreground centroid (1-based,
  // half away from zero, matching the reference construction)
  double cx_acc = 0, cy_acc = 0;
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x)
      if (gt.at(y, x) == T(1)) {
        cx_acc += static_cast<double>(x + 1);
        cy_acc += static_cast<double>(y + 1);
      }
  const auto cx = static_cast<std::int64_t>(std::llround(cx_acc / static_cast<double>(num_fg)));
  const auto cy = static_cast<std::int64_t>(std::llround(cy_acc / static_cast<double>(num_fg)));

  double s_region = 0;
  const double area = static_cast<double>(N);
  for (int q = 0; q < 4; ++q) {
    const std::int64_t y0 = (q < 2) ? 0 : cy;
    const std::int64_t y1 = (q < 2) ? cy : H;
    const std::int64_t x0 = (q % 2 == 0) ? 0 : cx;
    const std::int64_t x1 = (q % 2 == 0) ? cx : W;
    std::vector<double> p, g;
    p.reserve(static_cast<std::size_t>((y1 - y0) * (x1 - x0)));
    g.reserve(p.capacity());
    for (std::int64_t y = y0; y < y1; ++y)
      for (std::int64_t x = x0; x < x1; ++x) {
        p.push_back(static_cast<double>(pred.at(y, x)));
        g.push_back(static_cast<double>(gt.at(y, x)));
      }
    const double weight = static_cast<double>((y1 - y0) * (x1 - x0)) / area;
    s_region += weight * detail::region_similarity(p, g);
  }

  const double s = 0.5 * s_object + 0.5 * s_region;
  return s < 0 ? 0.0 : s;
}

/// Enhanced-alignment measure on the adaptively binarized prediction (or the
/// raw map when continuous_input). Degenerate ground truths use the cited
/// fallbacks; the score is the plain mean of the enhanced alignment map.
template <typename T>
double e_measure(const Tensor<T>& pred, const Tensor<T>& gt, bool continuous_input = false) {
  detail::require_map_pair(pred, gt);
  const std::int64_t N = gt.numel();
  std::vector<double> fm(static_cast<std::size_t>(N));
  if (continuous_input) {
    for (std::int64_t i = 0; i < N; ++i) fm[static_cast<std::size_t>(i)] = pred[i];
  } else {
    const auto bin = detail::adaptive_binarize(pred);
    for (std::int64_t i = 0; i < N; ++i)
      fm[static_cast<std::size_t>(i)] = bin[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }

  const std::int64_t num_fg = detail::count_foreground(gt);
  double acc = 0;
  if (num_fg == 0) {
    for (double v : fm) acc += 1.0 - v;
  } else if (num_fg == N) {
    for (double v : fm) acc += v;
  } else {
    double mu_fm = 0, mu_gt = 0;
    for (std::int64_t i = 0; i < N; ++i) {
      mu_fm += fm[static_cast<std::size_t>(i)];
      mu_gt += gt[i];
    }
    mu_fm /= static_cast<double>(N);
    mu_gt /= static_cast<double>(N);
    for (std::int64_t i = 0; i < N; ++i) {
      const double dfm = fm[static_cast<std::size_t>(i)] - mu_fm;
      const double dgt = static_cast<double>(gt[i]) - mu_gt;
      const double align = 2.0 * dgt * dfm / (dgt * dgt + dfm * dfm + kMatlabEps);
      acc += (align + 1.0) * (align + 1.0) / 4.0;
    }
  }
  return acc / static_cast<double>(N);
}

/// Precision/recall over the 256-level threshold sweep (strict >). Images
/// with empty ground truth are skipped. Per-image averaging by default;
/// pooled accumulates one dataset-wide confusion count per threshold.
template <typename T>
std::array<PrPoint, 256> pr_curve(const std::vector<Tensor<T>>& preds,
                                  const std::vector<Tensor<T>>& gts, bool pooled = false) {
  check<ValidationError>(!preds.empty() && preds.size() == gts.size(),
                         "pr_curve: need equal-length nonempty prediction/ground-truth lists");
  std::array<PrPoint, 256> curve{};
  std::array<double, 256> sum_p{}, sum_r{};
  std::array<std::int64_t, 256> pool_tp{}, pool_pred{}, pool_fg{};
  std::int64_t used = 0;

  for (std::size_t s = 0; s < preds.size(); ++s) {
    detail::require_map_pair(preds[s], gts[s]);
    const std::int64_t num_fg = detail::count_foreground(gts[s]);
    if (num_fg == 0) continue;
    ++used;
    for (int k = 0; k < 256; ++k) {
      const double t = static_cast<double>(k) / 255.0;
      std::int64_t tp = 0, predicted = 0;
      for (std::int64_t i = 0; i < preds[s].numel(); ++i) {
        if (static_cast<double>(preds[s][i]) > t) {
          ++predicted;
          if (gts[s][i] == T(1)) ++tp;
        }
      }
      if (pooled) {
        pool_tp[static_cast<std::size_t>(k)] += tp;
        pool_pred[static_cast<std::size_t>(k)] += predicted;
        pool_fg[static_cast<std::size_t>(k)] += num_fg;
      } else {
        sum_p[static_cast<std::size_t>(k)] +=
            predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 1.0;
        sum_r[static_cast<std::size_t>(k)] +=
            static_cast<double>(tp) / static_cast<double>(num_fg);
      }
    }
  }
  check<ValidationError>(used > 0, "pr_curve: every ground truth is empty");

  for (int k = 0; k < 256; ++k) {
    const auto u = static_cast<std::size_t>(k);
    curve[u].threshold = static_cast<double>(k) / 255.0;
    if (pooled) {
      curve[u].precision =
          pool_pred[u] > 0 ? static_cast<double>(pool_tp[u]) / static_cast<double>(pool_pred[u])
                           : 1.0;
      curve[u].recall = static_cast<double>(pool_tp[u]) / static_cast<double>(pool_fg[u]);
    } else {
      curve[u].precision = sum_p[u] / static_cast<double>(used);
      curve[u].recall = sum_r[u] / static_cast<double>(used);
    }
  }
  return curve;
}

}  // namespace cosal::metrics
