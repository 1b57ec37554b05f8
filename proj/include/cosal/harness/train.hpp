// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "cosal/core/optim.hpp"
#include "cosal/data/augment.hpp"
#include "cosal/data/loader.hpp"
#include "cosal/data/synthetic.hpp"
#include "cosal/harness/checkpoint.hpp"
#include "cosal/harness/config.hpp"
#include "cosal/network/losses.hpp"
#include "cosal/network/network.hpp"

namespace cosal::harness {

namespace detail {

/// {H,W} float map to a {1,1,H,W} tensor of the training scalar type.
template <typename T>
Tensor<T> lift_map(const Tensor<float>& m) {
  Tensor<T> out(Shape{1, 1, m.dim(0), m.dim(1)});
  for (std::int64_t i = 0; i < m.numel(); ++i) out[i] = static_cast<T>(m[i]);
  return out;
}

template <typename T>
void require_finite_loss(const Variable<T>& loss, const char* term) {
  check<NumericError>(loss.value().all_finite(), "training aborted: the ", term,
                      " loss is not finite");
}

}  // namespace detail

/// One batch of supervision targets, shaped [B,1,S,S] to match the network's
/// map outputs. depth is undefined when any sample in the batch lacks it.
template <typename T>
struct BatchTargets {
  Tensor<T> sal;
  Tensor<T> edge;
  Tensor<T> depth;
  bool has_depth = false;
};

template <typename T>
struct Batch {
  Variable<T> image;
  BatchTargets<T> targets;
};

template <typename T>
Batch<T> make_batch(const std::vector<data::SaliencySample>& samples) {
  check<ValidationError>(!samples.empty(), "make_batch: empty batch");
  const auto h = samples[0].height();
  const auto w = samples[0].width();
  const auto b = static_cast<std::int64_t>(samples.size());
  Batch<T> out;
  Tensor<T> image(Shape{b, 3, h, w});
  out.targets.sal = Tensor<T>(Shape{b, 1, h, w});
  out.targets.edge = Tensor<T>(Shape{b, 1, h, w});
  out.targets.depth = Tensor<T>(Shape{b, 1, h, w});
  out.targets.has_depth = true;
  const std::int64_t plane = h * w;
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    check<ShapeError>(s.height() == h && s.width() == w && s.rgb.shape() == Shape{3, h, w},
                      "make_batch: sample '", s.id, "' has mismatched shape");
    for (std::int64_t j = 0; j < 3 * plane; ++j)
      image[i * 3 * plane + j] = static_cast<T>(s.rgb[j]);
    for (std::int64_t j = 0; j < plane; ++j) {
      out.targets.sal[i * plane + j] = static_cast<T>(s.sal_gt[j]);
      out.targets.edge[i * plane + j] = static_cast<T>(s.edge_gt[j]);
    }
    if (s.has_depth()) {
      for (std::int64_t j = 0; j < plane; ++j)
        out.targets.depth[i * plane + j] = static_cast<T>(s.depth_gt[j]);
    } else {
      out.targets.has_depth = false;
    }
  }
  if (!out.targets.has_depth) out.targets.depth = Tensor<T>();
  out.image = Variable<T>(std::move(image), /*requires_grad=*/false);
  return out;
}

/// Builds the four supervision terms the ablation exposes and combines them.
/// Heads the configuration disables contribute nothing; every produced term
/// is checked finite so a diverging run aborts naming the culprit.
template <typename T>
LossBreakdown<T> compute_losses(const NetworkOutputs<T>& out, const BatchTargets<T>& targets,
                                const LossWeights& weights, Reduction red) {
  Variable<T> loss_e, loss_s, loss_d;
  Variable<T> loss_f = bce_loss(out.s_final, targets.sal, red);
  detail::require_finite_loss(loss_f, "final-map");
  if (out.m_edge.defined()) {
    loss_e = bce_loss(out.m_edge, targets.edge, red);
    detail::require_finite_loss(loss_e, "edge");
  }
  if (out.s_coarse.defined()) {
    loss_s = bce_loss(out.s_coarse, targets.sal, red);
    detail::require_finite_loss(loss_s, "coarse-saliency");
  }
  if (out.att_depth.defined() && targets.depth.defined()) {
    loss_d = smooth_l1_loss(out.att_depth, targets.depth, red);
    detail::require_finite_loss(loss_d, "depth");
  }
  auto breakdown = total_loss(loss_e, loss_s, loss_d, loss_f, weights);
  detail::require_finite_loss(breakdown.total, "total");
  return breakdown;
}

struct StepLog {
  int epoch = 0;
  int step = 0;
  double total = 0, edge = 0, sal = 0, depth = 0, final_map = 0;
};

inline std::string format_step(const StepLog& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "epoch=%d step=%d loss=%.17g edge=%.17g sal=%.17g depth=%.17g final=%.17g",
                s.epoch, s.step, s.total, s.edge, s.sal, s.depth, s.final_map);
  return buf;
}

struct TrainResult {
  std::vector<StepLog> steps;
  std::vector<double> epoch_means;
  Checkpoint checkpoint;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
};

/// SGD training over the train split: deterministic given cfg.seed, one log
/// line per step, a checkpoint per epoch plus a final one.
inline TrainResult train(const RunConfig& cfg, std::ostream* console = nullptr) {
  cfg.validate();
  check<ConfigError>(!cfg.data_root.empty(), "train: data_root is required");
  check<ConfigError>(!cfg.out_dir.empty(), "train: out_dir is required");
  auto manifest = data::scan_dataset(cfg.data_root, data::Split::kTrain, cfg.invert_depth);
  check<IngestionError>(!manifest.empty(), "train: the training manifest is empty");
  for (const auto& rec : manifest.records)
    check<IngestionError>(rec.has_depth(), "train: sample '", rec.id,
                          "' has no depth map; training requires depth supervision");

  std::filesystem::create_directories(cfg.out_dir);
  std::mt19937_64 init_rng(static_cast<std::uint64_t>(cfg.seed));
  SaliencyNetwork<float> net(init_rng, cfg.network_config());
  net.train(true);
  SGD<float> opt(net.parameters(), {cfg.lr, cfg.momentum, cfg.weight_decay});
  const Reduction red = reduction_from_string(cfg.reduction);

  std::vector<std::optional<data::SaliencySample>> cache(manifest.size());
  auto base_sample = [&](std::size_t i) -> const data::SaliencySample& {
    if (!cache[i]) cache[i] = data::load_sample(manifest, i, cfg.input_side);
    return *cache[i];
  };

  TrainResult result;
  result.log_path = std::filesystem::path(cfg.out_dir) / "train_log.txt";
  std::ofstream log(result.log_path);
  check<IngestionError>(log.good(), "train: cannot open log file ", result.log_path.string());

  std::mt19937_64 order_rng(static_cast<std::uint64_t>(cfg.seed) ^ 0x9e3779b97f4a7c15ULL);
  const auto n = manifest.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> loss_history;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    const int steps = cfg.steps_per_epoch > 0
                          ? cfg.steps_per_epoch
                          : static_cast<int>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                             static_cast<std::size_t>(cfg.batch_size));
    double epoch_sum = 0.0;
    for (int step = 0; step < steps; ++step) {
      std::vector<data::SaliencySample> samples;
      samples.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (int j = 0; j < cfg.batch_size; ++j) {
        const std::size_t idx =
            order[(static_cast<std::size_t>(step) * static_cast<std::size_t>(cfg.batch_size) +
                   static_cast<std::size_t>(j)) %
                  n];
        const auto& base = base_sample(idx);
        samples.push_back(cfg.augment ? data::augment(base, order_rng()) : base);
      }
      auto batch = make_batch<float>(samples);
      auto out = net.forward(batch.image);
      auto losses = compute_losses(out, batch.targets, cfg.weights, red);
      opt.zero_grad();
      losses.total.backward();
      opt.step();

      StepLog entry;
      entry.epoch = epoch;
      entry.step = step;
      entry.total = losses.total.value()[0];
      entry.edge = losses.edge;
      entry.sal = losses.sal;
      entry.depth = losses.depth;
      entry.final_map = losses.final_map;
      const std::string line = format_step(entry);
      log << line << "\n";
      if (console) *console << line << "\n";
      result.steps.push_back(entry);
      loss_history.push_back(entry.total);
      epoch_sum += entry.total;
    }
    result.epoch_means.push_back(epoch_sum / steps);

    char name[64];
    std::snprintf(name, sizeof name, "ckpt_epoch_%03d.bin", epoch);
    auto ck = Checkpoint::from_network(cfg, net, epoch + 1, loss_history);
    save_checkpoint(ck, std::filesystem::path(cfg.out_dir) / name);
  }

  result.checkpoint = Checkpoint::from_network(cfg, net, cfg.epochs, loss_history);
  result.checkpoint_path = std::filesystem::path(cfg.out_dir) / "ckpt_final.bin";
  save_checkpoint(result.checkpoint, result.checkpoint_path);
  log.flush();
  return result;
}

}  // namespace cosal::harness
