// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <random>

#include "cosal/data/loader.hpp"
#include "cosal/harness/checkpoint.hpp"
#include "cosal/harness/train.hpp"
#include "cosal/metrics/metrics.hpp"
#include "cosal/metrics/report.hpp"
#include "cosal/network/network.hpp"

namespace cosal::harness {

namespace detail {

/// {1,1,H,W} prediction to a {H,W} double map clamped to [0,1].
inline Tensor<double> prediction_map(const Tensor<float>& s_final) {
  check(s_final.rank() == 4 && s_final.dim(0) == 1 && s_final.dim(1) == 1,
        "prediction_map: expected a [1,1,H,W] map, got ", shape_str(s_final.shape()));
  Tensor<double> out(Shape{s_final.dim(2), s_final.dim(3)});
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::min(1.0, std::max(0.0, static_cast<double>(s_final[i])));
  return out;
}

}  // namespace detail

struct EvalOptions {
  std::filesystem::path out_dir;              // empty: no files written
  bool bypass_gt = false;                     // feed ground truth as the prediction
  data::Split split = data::Split::kTest;     // which split to score
};

struct EvalResult {
  metrics::MetricReport report;
  std::filesystem::path metrics_txt, metrics_csv, pr_csv;
};

/// RGB-only evaluation over the test split: every sample is loaded without
/// its depth file, scored with the full metric suite, and a process-wide
/// guard proves no depth bytes were read.
inline EvalResult evaluate(const Checkpoint& ck, const std::filesystem::path& data_root,
                           const EvalOptions& opt = {}) {
  auto manifest = data::scan_dataset(data_root, opt.split, ck.config.invert_depth);
  check<IngestionError>(!manifest.empty(), "evaluate: the ", data::split_name(opt.split),
                        " manifest is empty");

  std::mt19937_64 rng(static_cast<std::uint64_t>(ck.config.seed));
  SaliencyNetwork<float> net(rng, ck.config.network_config());
  ck.apply_to(net);
  net.train(false);

  const std::uint64_t depth_reads_before = data::depth_read_count().load();
  metrics::MetricAccumulator acc;
  for (auto rec : manifest.records) {
    rec.depth.clear();  // inference consumes RGB only; depth never loads
    data::LoadOptions lo;
    lo.target_side = ck.config.input_side;
    auto sample = data::load_sample(rec, lo);
    Tensor<double> gt = sample.sal_gt.cast<double>();
    if (opt.bypass_gt) {
      acc.add(gt, gt);
      continue;
    }
    auto batch = make_batch<float>({sample});
    NoGradGuard ng;
    auto out = net.forward(batch.image);
    acc.add(detail::prediction_map(out.s_final.value()), gt);
  }
  check<ValidationError>(data::depth_read_count().load() == depth_reads_before,
                         "evaluate: the depth-free guard tripped; depth bytes were read");

  EvalResult res;
  res.report = acc.report();
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    res.metrics_txt = opt.out_dir / "metrics.txt";
    res.metrics_csv = opt.out_dir / "metrics.csv";
    res.pr_csv = opt.out_dir / "pr_curve.csv";
    std::ofstream(res.metrics_txt) << res.report.to_key_values();
    std::ofstream(res.metrics_csv) << res.report.to_csv();
    std::ofstream(res.pr_csv) << res.report.pr_to_csv();
  }
  return res;
}

}  // namespace cosal::harness
