// Copyright 2026 The PSIC Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal layer library with hand-written backward passes. Every layer is
// stateless between calls: forward() is const, and backward() receives the
// forward input again so several forward passes may share one layer.

#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "psic/tensor.hpp"

namespace psic::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Param() = default;
  Param(std::string param_name, Shape shape)
      : name(std::move(param_name)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(0); }
};

using ParamList = std::vector<Param*>;

void zero_grad(const ParamList& params);
void set_frozen(const ParamList& params, bool frozen);
ParamList concat(std::initializer_list<ParamList> lists);

inline constexpr Real kLeakySlope = 0.1;

Tensor leaky_relu(const Tensor& x);
/// Gradient of leaky_relu evaluated at forward input `x`.
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) const = 0;
  /// Accumulates parameter gradients; returns dL/dx when `input_grad` is set,
  /// otherwise an empty tensor.
  virtual Tensor backward(const Tensor& x, const Tensor& grad_out, bool input_grad) = 0;
  virtual ParamList params() { return {}; }
};

/// 2-D convolution, square kernel, zero padding.
class Conv2d final : public Layer {
 public:
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int padding, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, bool input_grad) override;
  ParamList params() override { return {&weight_, &bias_}; }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_ = 0;
  int stride_ = 1;
  int padding_ = 0;
  Param weight_;  // (out, in, k, k)
  Param bias_;    // (1, out, 1, 1)
};

/// Transposed convolution with stride 2, kernel 5, padding 2 and output
/// padding 1, i.e. exact 2x spatial upsampling. Implemented as the adjoint of
/// the matching strided convolution.
class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(const std::string& name, int in_channels, int out_channels,
                  std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, bool input_grad) override;
  ParamList params() override { return {&weight_, &bias_}; }

 private:
  int in_ = 0;
  int out_ = 0;
  Param weight_;  // (in, out, k, k)
  Param bias_;
};

/// Affine map over the channel axis of an (N, in, 1, 1) tensor.
class Linear final : public Layer {
 public:
  Linear(const std::string& name, int in_features, int out_features, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, bool input_grad) override;
  ParamList params() override { return {&weight_, &bias_}; }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Param weight_;  // (1, 1, out, in)
  Param bias_;
};

class LeakyRelu final : public Layer {
 public:
  Tensor forward(const Tensor& x) const override { return leaky_relu(x); }
  Tensor backward(const Tensor& x, const Tensor& grad_out, bool) override {
    return leaky_relu_backward(x, grad_out);
  }
};

/// Collapses (N, C, H, W) to (N, C*H*W, 1, 1).
class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, bool) override;
};

/// Sequential composition that records every intermediate input.
class Chain {
 public:
  struct Trace {
    std::vector<Tensor> inputs;
  };

  Chain() = default;
  Chain(Chain&&) = default;
  Chain& operator=(Chain&&) = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& x, Trace* trace = nullptr) const;
  Tensor backward(const Trace& trace, const Tensor& grad_out, bool input_grad);
  ParamList params();
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct AdamOptions {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a fixed parameter list. Refuses to touch a
/// parameter whose `frozen` flag is set.
class Adam {
 public:
  Adam(ParamList params, AdamOptions options);

  /// Applies one update from the accumulated gradients. Throws
  /// FrozenParameterError before modifying anything if any managed parameter
  /// is frozen.
  void step();
  void zero_grad() { nn::zero_grad(params_); }
  void set_learning_rate(Real lr) { options_.learning_rate = lr; }
  const AdamOptions& options() const { return options_; }

  long steps() const { return steps_; }
  const ParamList& params() const { return params_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void restore(long steps, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  ParamList params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long steps_ = 0;
};

}  // namespace psic::nn
