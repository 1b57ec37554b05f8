// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cosal/core/autograd.hpp"

namespace cosal {

/// Stochastic gradient descent with classical momentum and L2 weight decay
/// folded into the gradient: v = mu * v + (g + wd * p); p -= lr * v.
/// Parameters that received no gradient in the current step are left alone.
template <typename T>
class SGD {
 public:
  struct Options {
    double lr = 1e-10;
    double momentum = 0.9;
    double weight_decay = 0.0005;
  };

  SGD(std::vector<Variable<T>> params, Options opts)
      : params_(std::move(params)), opts_(opts), velocity_(params_.size()) {}

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      Tensor<T>& v = velocity_[i];
      if (!v.defined()) v = zeros_like(p.value());
      const Tensor<T>& g = p.grad();
      Tensor<T>& w = p.value();
      const T mu = static_cast<T>(opts_.momentum);
      const T wd = static_cast<T>(opts_.weight_decay);
      const T lr = static_cast<T>(opts_.lr);
      for (std::int64_t j = 0; j < w.numel(); ++j) {
        v[j] = mu * v[j] + (g[j] + wd * w[j]);
        w[j] -= lr * v[j];
      }
    }
  }

  const Options& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }

 private:
  std::vector<Variable<T>> params_;
  Options opts_;
  std::vector<Tensor<T>> velocity_;
};

}  // namespace cosal
