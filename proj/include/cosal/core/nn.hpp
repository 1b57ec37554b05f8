// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cosal/core/conv.hpp"
#include "cosal/core/ops.hpp"

namespace cosal {

/// Base class for layers and composites. Owns named parameters (autograd
/// leaves) and buffers (non-learnable state such as running statistics), and
/// tracks child modules so the whole tree can be walked with dotted names.
/// Modules are pinned in memory (no copy/move): parents register raw
/// pointers to members.
template <typename T>
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  void train(bool on = true) {
    training_ = on;
    for (auto& [name, child] : children_) child->train(on);
  }
  bool is_training() const { return training_; }

  std::vector<std::pair<std::string, Variable<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Variable<T>>> out;
    collect_parameters("", out);
    return out;
  }

  std::vector<Variable<T>> parameters() const {
    std::vector<Variable<T>> out;
    for (auto& [name, var] : named_parameters()) out.push_back(var);
    return out;
  }

  std::vector<std::pair<std::string, Tensor<T>*>> named_buffers() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    collect_buffers("", out);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (auto& [name, var] : named_parameters()) n += var.value().numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, var] : named_parameters()) {
      auto v = var;
      v.zero_grad();
    }
  }

 protected:
  Variable<T> register_parameter(const std::string& name, Tensor<T> init) {
    Variable<T> v(std::move(init), /*requires_grad=*/true);
    params_.emplace_back(name, v);
    return v;
  }

  void register_buffer(const std::string& name, Tensor<T>& storage) {
    buffers_.emplace_back(name, &storage);
  }

  void register_child(const std::string& name, Module<T>& child) {
    children_.emplace_back(name, &child);
  }

 private:
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Variable<T>>>& out) const {
    for (const auto& [name, var] : params_) out.emplace_back(prefix + name, var);
    for (const auto& [name, child] : children_)
      child->collect_parameters(prefix + name + ".", out);
  }

  void collect_buffers(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    for (const auto& [name, buf] : buffers_) out.emplace_back(prefix + name, buf);
    for (const auto& [name, child] : children_) child->collect_buffers(prefix + name + ".", out);
  }

  bool training_ = true;
  std::vector<std::pair<std::string, Variable<T>>> params_;
  std::vector<std::pair<std::string, Tensor<T>*>> buffers_;
  std::vector<std::pair<std::string, Module<T>*>> children_;
};

namespace detail {

template <typename T>
Tensor<T> kaiming_normal(std::mt19937_64& rng, const Shape& shape, std::int64_t fan_in) {
  Tensor<T> t(shape);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

}  // namespace detail

template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(std::mt19937_64& rng, int in_ch, int out_ch, int kernel, ConvSpec spec = {},
         bool with_bias = true)
      : spec_(spec) {
    const std::int64_t fan_in = static_cast<std::int64_t>(in_ch) * kernel * kernel;
    weight_ = this->register_parameter(
        "weight", detail::kaiming_normal<T>(rng, Shape{out_ch, in_ch, kernel, kernel}, fan_in));
    if (with_bias) bias_ = this->register_parameter("bias", Tensor<T>::zeros(Shape{out_ch}));
  }

  Variable<T> forward(const Variable<T>& x) { return conv2d(x, weight_, bias_, spec_); }

  Variable<T> weight() const { return weight_; }
  Variable<T> bias() const { return bias_; }
  const ConvSpec& spec() const { return spec_; }

 private:
  ConvSpec spec_;
  Variable<T> weight_;
  Variable<T> bias_;  // undefined when the layer is bias-free
};

template <typename T>
class BatchNorm2d : public Module<T> {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5)
      : momentum_(momentum),
        eps_(eps),
        running_mean_(Tensor<T>::zeros(Shape{channels})),
        running_var_(Tensor<T>::full(Shape{channels}, T(1))) {
    gamma_ = this->register_parameter("gamma", Tensor<T>::full(Shape{channels}, T(1)));
    beta_ = this->register_parameter("beta", Tensor<T>::zeros(Shape{channels}));
    this->register_buffer("running_mean", running_mean_);
    this->register_buffer("running_var", running_var_);
  }

  Variable<T> forward(const Variable<T>& x) {
    return batch_norm(x, gamma_, beta_, running_mean_, running_var_, this->is_training(),
                      momentum_, eps_);
  }

  Variable<T> gamma() const { return gamma_; }
  Variable<T> beta() const { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  double momentum_;
  double eps_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  Variable<T> gamma_;
  Variable<T> beta_;
};

template <typename T>
class PReLU : public Module<T> {
 public:
  explicit PReLU(double init_slope = 0.25) {
    slope_ = this->register_parameter("slope", Tensor<T>::full(Shape{1}, static_cast<T>(init_slope)));
  }

  Variable<T> forward(const Variable<T>& x) { return prelu(x, slope_); }

  Variable<T> slope() const { return slope_; }

 private:
  Variable<T> slope_;
};

/// Conv -> BatchNorm -> PReLU, the building block used by the transition
/// layers, the dilated context branches and the depth trunk. The convolution
/// is bias-free (the normalization shift absorbs it).
template <typename T>
class ConvBnPRelu : public Module<T> {
 public:
  ConvBnPRelu(std::mt19937_64& rng, int in_ch, int out_ch, int kernel, ConvSpec spec = {})
      : conv_(rng, in_ch, out_ch, kernel, spec, /*with_bias=*/false), bn_(out_ch), act_() {
    this->register_child("conv", conv_);
    this->register_child("bn", bn_);
    this->register_child("act", act_);
  }

  Variable<T> forward(const Variable<T>& x) { return act_.forward(bn_.forward(conv_.forward(x))); }

  Conv2d<T>& conv() { return conv_; }
  BatchNorm2d<T>& bn() { return bn_; }
  PReLU<T>& act() { return act_; }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  PReLU<T> act_;
};

}  // namespace cosal
