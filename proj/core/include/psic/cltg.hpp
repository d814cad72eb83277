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

// Conditional latent trigger generation: a decode-time mode selects one of two
// learned embeddings, and an independent two-layer MLP per decoder block turns
// it into a per-channel bias that is added to that block's input features.

#pragma once

#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "psic/nn.hpp"
#include "psic/tensor.hpp"

namespace psic::cltg {

enum class Mode { kEncrypted = 0, kFull = 1 };

std::string_view to_string(Mode mode);

/// One bias vector per decoder block, each as long as that block's input depth.
struct TriggerStack {
  std::vector<std::vector<Real>> triggers;

  std::size_t size() const { return triggers.size(); }
  const std::vector<Real>& operator[](std::size_t k) const { return triggers[k]; }
};

/// out[n,c,h,w] = trigger[c] * channel_weights[c] + features[n,c,h,w].
Tensor fuse(const Tensor& features, std::span<const Real> trigger,
            std::span<const Real> channel_weights);

/// Gradients of fuse() w.r.t. the trigger and the channel weights. The
/// gradient w.r.t. the features is grad_out itself.
struct FuseGrad {
  std::vector<Real> trigger;
  std::vector<Real> channel_weights;
};
FuseGrad fuse_backward(const Tensor& grad_out, std::span<const Real> trigger,
                       std::span<const Real> channel_weights);

/// Two learned vectors of length `dim`, one per mode.
class ModeEmbedding {
 public:
  ModeEmbedding(int dim, std::mt19937_64& rng);

  int dim() const { return dim_; }
  std::span<const Real> operator()(Mode mode) const;
  void accumulate_grad(Mode mode, std::span<const Real> grad);
  nn::ParamList params() { return {&table_}; }
  nn::Param& table() { return table_; }

 private:
  int dim_;
  nn::Param table_;  // (1, 1, 2, dim)
};

/// MLP dim -> 2*dim -> depth with a leaky rectifier between, plus the
/// per-channel weighting vector applied at fusion. The output layer and its
/// bias start at zero so an untrained block injects nothing.
class CltgBlock {
 public:
  struct Trace {
    Tensor input;
    Tensor hidden_pre;
    Tensor hidden;
  };

  CltgBlock(int block_index, int embed_dim, int depth, std::mt19937_64& rng);

  int depth() const { return depth_; }
  std::vector<Real> trigger(std::span<const Real> embedding, Trace* trace = nullptr) const;
  /// Backpropagates dL/dtrigger; returns dL/dembedding.
  std::vector<Real> backward(const Trace& trace, std::span<const Real> grad_trigger);
  std::span<const Real> channel_weights() const { return channel_weight_.value.values(); }
  nn::Param& channel_weight() { return channel_weight_; }
  nn::Linear& output_layer() { return out_; }
  nn::ParamList params();

 private:
  int depth_;
  nn::Linear hidden_;
  nn::Linear out_;
  nn::Param channel_weight_;  // (1, depth, 1, 1)
};

/// The full conditional trigger generator: mode embeddings plus one block per
/// decoder stage.
class TriggerGenerator {
 public:
  struct Trace {
    Mode mode = Mode::kEncrypted;
    std::vector<CltgBlock::Trace> blocks;
  };

  TriggerGenerator(int embed_dim, std::span<const int> block_depths, std::mt19937_64& rng);

  TriggerStack generate(Mode mode, Trace* trace = nullptr) const;
  void backward(const Trace& trace, std::span<const std::vector<Real>> grad_triggers);

  std::size_t block_count() const { return blocks_.size(); }
  CltgBlock& block(std::size_t k) { return blocks_[k]; }
  const CltgBlock& block(std::size_t k) const { return blocks_[k]; }
  ModeEmbedding& embedding() { return embedding_; }
  const ModeEmbedding& embedding() const { return embedding_; }
  nn::ParamList params();

 private:
  ModeEmbedding embedding_;
  std::vector<CltgBlock> blocks_;
};

TriggerStack generate_triggers(const TriggerGenerator& generator, Mode mode);

}  // namespace psic::cltg
