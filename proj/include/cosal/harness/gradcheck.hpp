// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "cosal/harness/config.hpp"
#include "cosal/harness/train.hpp"
#include "cosal/network/losses.hpp"
#include "cosal/network/network.hpp"

namespace cosal::harness {

struct GradCheckFinding {
  std::string param;       // module path
  std::int64_t index = 0;  // flat element index within the tensor
  double analytic = 0, numeric = 0, rel_err = 0;
};

struct GradCheckResult {
  int n_checked = 0;
  double max_rel_err = 0;
  GradCheckFinding worst;
  std::vector<GradCheckFinding> failures;  // rel_err > 1e-3
};

inline constexpr double kGradCheckFailThreshold = 1e-3;

/// Central finite differences against the analytic gradients of the full
/// training objective, in double precision on a tiny model. Samples entries
/// uniformly across all parameter tensors so every module is exercised.
inline GradCheckResult grad_check(const RunConfig& cfg, int samples = 200, double h = 1e-5) {
  check<ConfigError>(cfg.scale == "tiny", "grad_check: requires the tiny scale");
  check<ConfigError>(cfg.input_side <= 16, "grad_check: input_side must be <= 16");
  cfg.validate();

  std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.seed));
  SaliencyNetwork<double> net(rng, cfg.network_config());
  net.train(true);
  const Reduction red = reduction_from_string(cfg.reduction);

  const std::int64_t side = cfg.input_side;
  Tensor<double> image(Shape{1, 3, side, side});
  BatchTargets<double> targets;
  targets.sal = Tensor<double>(Shape{1, 1, side, side});
  targets.edge = Tensor<double>(Shape{1, 1, side, side});
  targets.depth = Tensor<double>(Shape{1, 1, side, side});
  targets.has_depth = true;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::int64_t i = 0; i < image.numel(); ++i) image[i] = unit(rng);
  for (std::int64_t i = 0; i < targets.sal.numel(); ++i) {
    targets.sal[i] = unit(rng) < 0.4 ? 1.0 : 0.0;
    targets.edge[i] = unit(rng) < 0.15 ? 1.0 : 0.0;
    targets.depth[i] = unit(rng);
  }
  Variable<double> input(std::move(image), /*requires_grad=*/false);

  auto loss_value = [&]() {
    NoGradGuard ng;
    auto out = net.forward(input);
    return static_cast<double>(
        compute_losses(out, targets, cfg.weights, red).total.value()[0]);
  };

  // One analytic pass gathers every gradient.
  auto named = net.named_parameters();
  net.zero_grad();
  {
    auto out = net.forward(input);
    compute_losses(out, targets, cfg.weights, red).total.backward();
  }

  std::vector<std::pair<std::size_t, std::int64_t>> entries;
  for (std::size_t p = 0; p < named.size(); ++p)
    for (std::int64_t j = 0; j < named[p].second.value().numel(); ++j) entries.emplace_back(p, j);
  check<ConfigError>(static_cast<int>(entries.size()) >= samples, "grad_check: the model has ",
                     entries.size(), " parameters, fewer than the ", samples, " requested");
  std::shuffle(entries.begin(), entries.end(), rng);

  GradCheckResult result;
  for (int k = 0; k < samples; ++k) {
    const auto [p, j] = entries[static_cast<std::size_t>(k)];
    auto var = named[p].second;
    const double analytic = var.has_grad() ? static_cast<double>(var.grad()[j]) : 0.0;
    const double original = var.value()[j];
    var.value()[j] = original + h;
    const double up = loss_value();
    var.value()[j] = original - h;
    const double down = loss_value();
    var.value()[j] = original;
    const double numeric = (up - down) / (2.0 * h);
    const double rel =
        std::abs(numeric - analytic) / std::max({1.0, std::abs(numeric), std::abs(analytic)});

    GradCheckFinding f;
    f.param = named[p].first;
    f.index = j;
    f.analytic = analytic;
    f.numeric = numeric;
    f.rel_err = rel;
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst = f;
    }
    if (rel > kGradCheckFailThreshold) result.failures.push_back(f);
    ++result.n_checked;
  }
  return result;
}

}  // namespace cosal::harness
