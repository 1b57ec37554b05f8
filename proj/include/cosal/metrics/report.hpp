// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <string>

#include "cosal/metrics/metrics.hpp"

namespace cosal::metrics {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Dataset-level evaluation summary. mae averages over every sample; the
/// other scalars and the PR curve average over samples with nonempty ground
/// truth (n_scored of n_samples).
struct MetricReport {
  double mae = 0;
  double f_beta = 0;
  double f_beta_w = 0;
  double s_measure = 0;
  double e_measure = 0;
  std::array<PrPoint, 256> pr_curve{};
  std::int64_t n_samples = 0;
  std::int64_t n_scored = 0;

  std::string to_key_values() const {
    std::string out;
    out += "mae=" + detail::fmt_double(mae) + "\n";
    out += "f_beta=" + detail::fmt_double(f_beta) + "\n";
    out += "f_beta_w=" + detail::fmt_double(f_beta_w) + "\n";
    out += "s_measure=" + detail::fmt_double(s_measure) + "\n";
    out += "e_measure=" + detail::fmt_double(e_measure) + "\n";
    out += "n_samples=" + std::to_string(n_samples) + "\n";
    out += "n_scored=" + std::to_string(n_scored) + "\n";
    return out;
  }

  std::string to_csv() const {
    std::string out = "metric,value\n";
    out += "mae," + detail::fmt_double(mae) + "\n";
    out += "f_beta," + detail::fmt_double(f_beta) + "\n";
    out += "f_beta_w," + detail::fmt_double(f_beta_w) + "\n";
    out += "s_measure," + detail::fmt_double(s_measure) + "\n";
    out += "e_measure," + detail::fmt_double(e_measure) + "\n";
    out += "n_samples," + std::to_string(n_samples) + "\n";
    out += "n_scored," + std::to_string(n_scored) + "\n";
    return out;
  }

  std::string pr_to_csv() const {
    std::string out = "threshold,precision,recall\n";
    for (const auto& p : pr_curve)
      out += detail::fmt_double(p.threshold) + "," + detail::fmt_double(p.precision) + "," +
             detail::fmt_double(p.recall) + "\n";
    return out;
  }
};

/// Streaming aggregation: feed (prediction, ground truth) pairs, read the
/// averaged report at the end. PR accumulation is per-image averaged.
class MetricAccumulator {
 public:
  template <typename T>
  void add(const Tensor<T>& pred, const Tensor<T>& gt) {
    sum_mae_ += mae(pred, gt);
    ++n_samples_;
    const std::int64_t num_fg = detail::count_foreground(gt);
    if (num_fg == 0) return;
    ++n_scored_;
    sum_f_ += mean_f_measure(pred, gt).value;
    sum_wf_ += weighted_f_measure(pred, gt).value;
    sum_s_ += s_measure(pred, gt);
    sum_e_ += e_measure(pred, gt);
    for (int k = 0; k < 256; ++k) {
      const double t = static_cast<double>(k) / 255.0;
      std::int64_t tp = 0, predicted = 0;
      for (std::int64_t i = 0; i < pred.numel(); ++i) {
        if (static_cast<double>(pred[i]) > t) {
          ++predicted;
          if (gt[i] == T(1)) ++tp;
        }
      }
      const auto u = static_cast<std::size_t>(k);
      sum_p_[u] += predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 1.0;
      sum_r_[u] += static_cast<double>(tp) / static_cast<double>(num_fg);
    }
  }

  MetricReport report() const {
    check<ValidationError>(n_samples_ > 0, "metric report: no samples accumulated");
    MetricReport r;
    r.n_samples = n_samples_;
    r.n_scored = n_scored_;
    r.mae = sum_mae_ / static_cast<double>(n_samples_);
    if (n_scored_ > 0) {
      const double d = static_cast<double>(n_scored_);
      r.f_beta = sum_f_ / d;
      r.f_beta_w = sum_wf_ / d;
      r.s_measure = sum_s_ / d;
      r.e_measure = sum_e_ / d;
      for (int k = 0; k < 256; ++k) {
        const auto u = static_cast<std::size_t>(k);
        r.pr_curve[u].threshold = static_cast<double>(k) / 255.0;
        r.pr_curve[u].precision = sum_p_[u] / d;
        r.pr_curve[u].recall = sum_r_[u] / d;
      }
    } else {
      for (int k = 0; k < 256; ++k)
        r.pr_curve[static_cast<std::size_t>(k)].threshold = static_cast<double>(k) / 255.0;
    }
    return r;
  }

 private:
  double sum_mae_ = 0, sum_f_ = 0, sum_wf_ = 0, sum_s_ = 0, sum_e_ = 0;
  std::array<double, 256> sum_p_{}, sum_r_{};
  std::int64_t n_samples_ = 0, n_scored_ = 0;
};

}  // namespace cosal::metrics
