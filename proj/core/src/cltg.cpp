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

#include "psic/cltg.hpp"

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::cltg {

std::string_view to_string(Mode mode) {
  return mode == Mode::kFull ? "full" : "encrypted";
}

Tensor fuse(const Tensor& features, std::span<const Real> trigger,
            std::span<const Real> channel_weights) {
  const Shape& s = features.shape();
  if (trigger.size() != static_cast<std::size_t>(s.c) ||
      channel_weights.size() != static_cast<std::size_t>(s.c)) {
    throw ShapeError(fmt::format("fuse: {} channels but trigger {} / weights {}", s.c,
                                 trigger.size(), channel_weights.size()));
  }
  Tensor out = features;
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    Real* img = out.image(n).data();
    for (int c = 0; c < s.c; ++c) {
      const Real bias = trigger[c] * channel_weights[c];
      if (bias == 0) continue;
      Real* p = img + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias;
    }
  }
  return out;
}

FuseGrad fuse_backward(const Tensor& grad_out, std::span<const Real> trigger,
                       std::span<const Real> channel_weights) {
  const Shape& s = grad_out.shape();
  FuseGrad g{std::vector<Real>(s.c, 0.0), std::vector<Real>(s.c, 0.0)};
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const Real* img = grad_out.image(n).data();
    for (int c = 0; c < s.c; ++c) {
      Real sum = 0;
      const Real* p = img + c * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      g.trigger[c] += sum * channel_weights[c];
      g.channel_weights[c] += sum * trigger[c];
    }
  }
  return g;
}

// ---------------------------------------------------------- ModeEmbedding

ModeEmbedding::ModeEmbedding(int dim, std::mt19937_64& rng)
    : dim_(dim), table_("cltg.mode_embedding", {1, 1, 2, dim}) {
  std::normal_distribution<Real> dist(0.0, 1.0);
  for (auto& v : table_.value.values()) v = dist(rng);
}

std::span<const Real> ModeEmbedding::operator()(Mode mode) const {
  return table_.value.values().subspan(static_cast<std::size_t>(mode) * dim_, dim_);
}

void ModeEmbedding::accumulate_grad(Mode mode, std::span<const Real> grad) {
  Real* g = table_.grad.data() + static_cast<std::size_t>(mode) * dim_;
  for (int i = 0; i < dim_; ++i) g[i] += grad[i];
}

// -------------------------------------------------------------- CltgBlock

CltgBlock::CltgBlock(int block_index, int embed_dim, int depth, std::mt19937_64& rng)
    : depth_(depth),
      hidden_(fmt::format("cltg.block{}.hidden", block_index), embed_dim, 2 * embed_dim, rng),
      out_(fmt::format("cltg.block{}.out", block_index), 2 * embed_dim, depth, rng),
      channel_weight_(fmt::format("cltg.block{}.channel_weight", block_index),
                      {1, depth, 1, 1}) {
  out_.weight().value.fill(0);
  out_.bias().value.fill(0);
  channel_weight_.value.fill(1);
}

std::vector<Real> CltgBlock::trigger(std::span<const Real> embedding, Trace* trace) const {
  Tensor in({1, static_cast<int>(embedding.size()), 1, 1});
  std::copy(embedding.begin(), embedding.end(), in.data());
  Tensor pre = hidden_.forward(in);
  Tensor act = nn::leaky_relu(pre);
  Tensor out = out_.forward(act);
  if (trace) {
    trace->input = std::move(in);
    trace->hidden_pre = std::move(pre);
    trace->hidden = std::move(act);
  }
  return {out.data(), out.data() + out.size()};
}

std::vector<Real> CltgBlock::backward(const Trace& trace, std::span<const Real> grad_trigger) {
  Tensor g({1, depth_, 1, 1});
  std::copy(grad_trigger.begin(), grad_trigger.end(), g.data());
  Tensor g_act = out_.backward(trace.hidden, g, true);
  Tensor g_pre = nn::leaky_relu_backward(trace.hidden_pre, g_act);
  Tensor g_in = hidden_.backward(trace.input, g_pre, true);
  return {g_in.data(), g_in.data() + g_in.size()};
}

nn::ParamList CltgBlock::params() {
  return nn::concat({hidden_.params(), out_.params(), {&channel_weight_}});
}

// ------------------------------------------------------- TriggerGenerator

TriggerGenerator::TriggerGenerator(int embed_dim, std::span<const int> block_depths,
                                   std::mt19937_64& rng)
    : embedding_(embed_dim, rng) {
  blocks_.reserve(block_depths.size());
  for (std::size_t k = 0; k < block_depths.size(); ++k) {
    blocks_.emplace_back(static_cast<int>(k), embed_dim, block_depths[k], rng);
  }
}

TriggerStack TriggerGenerator::generate(Mode mode, Trace* trace) const {
  TriggerStack stack;
  stack.triggers.reserve(blocks_.size());
  if (trace) {
    trace->mode = mode;
    trace->blocks.assign(blocks_.size(), {});
  }
  const auto emb = embedding_(mode);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    stack.triggers.push_back(blocks_[k].trigger(emb, trace ? &trace->blocks[k] : nullptr));
  }
  return stack;
}

void TriggerGenerator::backward(const Trace& trace,
                                std::span<const std::vector<Real>> grad_triggers) {
  if (grad_triggers.size() != blocks_.size() || trace.blocks.size() != blocks_.size()) {
    throw ShapeError("trigger backward: block count mismatch");
  }
  std::vector<Real> g_emb(embedding_.dim(), 0.0);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    auto g = blocks_[k].backward(trace.blocks[k], grad_triggers[k]);
    for (int i = 0; i < embedding_.dim(); ++i) g_emb[i] += g[i];
  }
  embedding_.accumulate_grad(trace.mode, g_emb);
}

nn::ParamList TriggerGenerator::params() {
  nn::ParamList out = embedding_.params();
  for (auto& b : blocks_) {
    auto p = b.params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

TriggerStack generate_triggers(const TriggerGenerator& generator, Mode mode) {
  return generator.generate(mode);
}

}  // namespace psic::cltg
