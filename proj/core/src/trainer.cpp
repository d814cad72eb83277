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

#include "psic/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::train {
namespace {

using nlohmann::json;

std::string_view policy_name(SessionPolicy p) {
  return p == SessionPolicy::kSplit ? "split" : "interleave";
}

SessionPolicy parse_policy(const std::string& s) {
  if (s == "split") return SessionPolicy::kSplit;
  if (s == "interleave") return SessionPolicy::kInterleave;
  throw ConfigError(fmt::format("unknown session policy '{}'", s));
}

EncryptionLoss parse_loss(const std::string& s) {
  if (s == "uaeo") return EncryptionLoss::kUaeo;
  if (s == "naive") return EncryptionLoss::kNaive;
  throw ConfigError(fmt::format("unknown encryption loss '{}'", s));
}

// dL/dx_hat of D = 255^2 * MSE(x_hat, x), scaled by `weight`.
Tensor distortion_grad(const Tensor& x_hat, const Tensor& x, Real weight) {
  Tensor g(x.shape());
  const Real k = weight * codec::kDistortionScale * 2.0 / static_cast<Real>(x.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = k * (x_hat[i] - x[i]);
  return g;
}

Real pixels(const Tensor& x) {
  return static_cast<Real>(x.shape().n) * x.shape().h * x.shape().w;
}

}  // namespace

void TrainConfig::validate() const {
  codec.validate();
  if (batch_size < 2) throw ConfigError(fmt::format("batch size {} < 2", batch_size));
  if (stage1_epochs < 0 || stage2_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (!(stage1_lr > 0) || !(stage2_lr > 0)) throw ConfigError("learning rates must be > 0");
  if (!(uaeo_scale > 0 && uaeo_scale < 1)) {
    throw ConfigError(fmt::format("uaeo scale {} outside (0, 1)", uaeo_scale));
  }
  if (!(heldout_fraction >= 0 && heldout_fraction < 1)) {
    throw ConfigError(fmt::format("held-out fraction {} outside [0, 1)", heldout_fraction));
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"codec", c.codec},
       {"batch_size", c.batch_size},
       {"stage1_epochs", c.stage1_epochs},
       {"stage1_lr", c.stage1_lr},
       {"stage2_epochs", c.stage2_epochs},
       {"stage2_lr", c.stage2_lr},
       {"stage1_policy", policy_name(c.stage1_policy)},
       {"stage2_policy", policy_name(c.stage2_policy)},
       {"uaeo_scale", c.uaeo_scale},
       {"loss", c.loss == EncryptionLoss::kUaeo ? "uaeo" : "naive"},
       {"baseline", c.baseline},
       {"seed", c.seed},
       {"heldout_fraction", c.heldout_fraction}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "codec",         "batch_size",    "stage1_epochs", "stage1_lr",  "stage2_epochs",
      "stage2_lr",     "stage1_policy", "stage2_policy", "uaeo_scale", "loss",
      "baseline",      "seed",          "heldout_fraction"};
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown training config key '{}'", key));
  }
  try {
    const TrainConfig d;
    c.codec = j.value("codec", d.codec);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.stage1_epochs = j.value("stage1_epochs", d.stage1_epochs);
    c.stage1_lr = j.value("stage1_lr", d.stage1_lr);
    c.stage2_epochs = j.value("stage2_epochs", d.stage2_epochs);
    c.stage2_lr = j.value("stage2_lr", d.stage2_lr);
    c.stage1_policy = parse_policy(j.value("stage1_policy", std::string("split")));
    c.stage2_policy = parse_policy(j.value("stage2_policy", std::string("interleave")));
    c.uaeo_scale = j.value("uaeo_scale", d.uaeo_scale);
    c.loss = parse_loss(j.value("loss", std::string("uaeo")));
    c.baseline = j.value("baseline", d.baseline);
    c.seed = j.value("seed", d.seed);
    c.heldout_fraction = j.value("heldout_fraction", d.heldout_fraction);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad training config: {}", e.what()));
  }
  c.validate();
}

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::kS1Perception: return "s1_perception";
    case Criterion::kS1Encryption: return "s1_encryption";
    case Criterion::kS2Full: return "s2_full";
    case Criterion::kS2Encrypted: return "s2_encrypted";
  }
  return "unknown";
}

Criterion schedule_criterion(int stage, SessionPolicy policy, bool baseline, int i,
                             int iterations) {
  const Criterion first = stage == 1 ? Criterion::kS1Perception : Criterion::kS2Full;
  const Criterion second = stage == 1 ? Criterion::kS1Encryption : Criterion::kS2Encrypted;
  if (baseline) return first;
  if (policy == SessionPolicy::kInterleave) return i % 2 == 0 ? first : second;
  return i < (iterations + 1) / 2 ? first : second;
}

json to_json(const EpochRecord& r) {
  json steps = json::object();
  json totals = json::object();
  for (int k = 0; k < 4; ++k) {
    if (r.steps[k] == 0) continue;
    const auto name = std::string(to_string(static_cast<Criterion>(k)));
    steps[name] = r.steps[k];
    totals[name] = r.mean_total[k];
  }
  return {{"stage", r.stage},
          {"epoch", r.epoch},
          {"steps", steps},
          {"mean_total", totals},
          {"mean_distortion", r.mean_distortion},
          {"mean_rate_bpp", r.mean_rate},
          {"mean_encryption", r.mean_encryption},
          {"seconds", r.seconds}};
}

// ---------------------------------------------------------------- Trainer

Trainer::Trainer(codec::CodecModel& model, oracle::SurrogateOracle& oracle, TrainConfig config)
    : model_(model), oracle_(oracle), config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  begin_stage(1);
}

void Trainer::begin_stage(int stage) {
  if (stage != 1 && stage != 2) throw ConfigError(fmt::format("no stage {}", stage));
  if (stage == 1) {
    nn::set_frozen(model_.all_params(), false);
    adam_.emplace(model_.all_params(), nn::AdamOptions{.learning_rate = config_.stage1_lr});
  } else {
    nn::set_frozen(model_.encoder_params(), true);
    nn::set_frozen(model_.entropy_params(), true);
    nn::set_frozen(model_.decoder_params(), false);
    adam_.emplace(model_.decoder_params(), nn::AdamOptions{.learning_rate = config_.stage2_lr});
  }
  state_.stage = stage;
  state_.epoch = 0;
}

void Trainer::require_stage(int stage, const char* step) const {
  if (state_.stage == stage) return;
  if (stage == 1) {
    throw FrozenParameterError(
        fmt::format("{}: encoder and entropy model are frozen in stage 2", step));
  }
  throw ConfigError(fmt::format("{}: stage 2 has not begun", step));
}

void Trainer::guard(const StepLosses& l, const char* step) const {
  for (Real v : {l.distortion, l.rate, l.encryption, l.total}) {
    if (!std::isfinite(v)) {
      throw DivergenceError(fmt::format("{} produced a non-finite loss at step {}", step,
                                        state_.steps));
    }
  }
}

void Trainer::finish_step() {
  adam_->step();
  ++state_.steps;
}

Real Trainer::encryption_loss(const Tensor& originals, const Tensor& reconstructions,
                              std::span<const std::string> texts, Tensor* grad) {
  const int k = reconstructions.shape().n;
  if (static_cast<std::size_t>(k) != texts.size() || originals.shape().n != k) {
    throw ShapeError(fmt::format("encryption loss: {} images vs {} texts", k, texts.size()));
  }
  const Matrix text_emb = oracle_.embed_texts(texts);
  oracle::SurrogateOracle::ImageTrace trace;
  const Matrix s = oracle_.embed_images(reconstructions, &trace) * text_emb.transpose();
  Matrix ds = Matrix::Zero(k, k);
  Real loss = 0;
  if (config_.loss == EncryptionLoss::kUaeo) {
    const uaeo::Objective objective(config_.uaeo_scale);
    const uaeo::UncertaintyTable table =
        objective.table(oracle_.embed_images(originals) * text_emb.transpose());
    for (int i = 0; i < k; ++i) {
      const Eigen::RowVectorXd row = s.row(i);
      const auto lg = objective.loss(std::span(row.data(), row.size()), table.targets[i]);
      loss += lg.loss / k;
      for (int j = 0; j < k; ++j) ds(i, j) = lg.grad[j] / k;
    }
  } else {
    for (int i = 0; i < k; ++i) {
      loss += s(i, i) / k;
      ds(i, i) = 1.0 / k;
    }
  }
  if (grad) *grad = oracle_.image_backward(trace, ds * text_emb, false);
  return loss;
}

StepLosses Trainer::step_s1_perception(const Tensor& batch) {
  require_stage(1, "s1_perception");
  const Real lambda = model_.config().lambda();
  adam_->zero_grad();
  codec::TrainingPass pass(model_, batch, cltg::Mode::kFull, true, rng_);
  StepLosses l;
  l.distortion = codec::kDistortionScale * codec::mse(pass.reconstruction(), batch);
  l.rate = pass.bits_per_pixel();
  l.total = lambda * l.distortion + l.rate;
  guard(l, "s1_perception");
  pass.backward(distortion_grad(pass.reconstruction(), batch, lambda), 1.0 / pixels(batch));
  finish_step();
  return l;
}

StepLosses Trainer::step_s1_encryption(const Tensor& batch, std::span<const std::string> texts) {
  require_stage(1, "s1_encryption");
  const Real lambda = model_.config().lambda();
  adam_->zero_grad();
  codec::TrainingPass pass(model_, batch, cltg::Mode::kEncrypted, true, rng_);
  StepLosses l;
  Tensor g_enc;
  l.encryption = encryption_loss(batch, pass.reconstruction(), texts, &g_enc);
  l.distortion = codec::kDistortionScale * codec::mse(pass.reconstruction(), batch);
  l.rate = pass.bits_per_pixel();
  l.total = lambda * (l.distortion + l.encryption) + l.rate;
  guard(l, "s1_encryption");
  Tensor g = distortion_grad(pass.reconstruction(), batch, lambda);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * g_enc[i];
  pass.backward(g, 1.0 / pixels(batch));
  finish_step();
  return l;
}

StepLosses Trainer::step_s2_full(const Tensor& batch) {
  require_stage(2, "s2_full");
  adam_->zero_grad();
  codec::TrainingPass pass(model_, batch, cltg::Mode::kFull, false, rng_);
  StepLosses l;
  l.distortion = codec::kDistortionScale * codec::mse(pass.reconstruction(), batch);
  l.total = l.distortion;
  guard(l, "s2_full");
  pass.backward(distortion_grad(pass.reconstruction(), batch, 1.0), 0.0);
  finish_step();
  return l;
}

StepLosses Trainer::step_s2_encrypted(const Tensor& batch, std::span<const std::string> texts) {
  require_stage(2, "s2_encrypted");
  adam_->zero_grad();
  codec::TrainingPass pass(model_, batch, cltg::Mode::kEncrypted, false, rng_);
  StepLosses l;
  Tensor g_enc;
  l.encryption = encryption_loss(batch, pass.reconstruction(), texts, &g_enc);
  l.distortion = codec::kDistortionScale * codec::mse(pass.reconstruction(), batch);
  l.total = l.encryption;
  guard(l, "s2_encrypted");
  pass.backward(g_enc, 0.0);
  finish_step();
  return l;
}

StepLosses Trainer::step(Criterion c, const Tensor& batch, std::span<const std::string> texts) {
  switch (c) {
    case Criterion::kS1Perception: return step_s1_perception(batch);
    case Criterion::kS1Encryption: return step_s1_encryption(batch, texts);
    case Criterion::kS2Full: return step_s2_full(batch);
    case Criterion::kS2Encrypted: return step_s2_encrypted(batch, texts);
  }
  throw ConfigError("unknown criterion");
}

EpochRecord Trainer::run_epoch(const data::Dataset& data, std::span<const int> train) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> order(train.begin(), train.end());
  std::shuffle(order.begin(), order.end(), rng_);
  const int k = config_.batch_size;
  const int iterations = std::max(1, static_cast<int>(order.size()) / k);
  EpochRecord rec;
  rec.stage = state_.stage;
  rec.epoch = state_.epoch;
  for (int it = 0; it < iterations; ++it) {
    const int begin = it * k;
    const int count = std::min(k, static_cast<int>(order.size()) - begin);
    std::span<const int> idx(order.data() + begin, count);
    const Criterion c =
        schedule_criterion(state_.stage, state_.stage == 1 ? config_.stage1_policy
                                                           : config_.stage2_policy,
                           config_.baseline, it, iterations);
    const auto texts = data.captions(idx);
    const StepLosses l = step(c, data.batch(idx), texts);
    const int ci = static_cast<int>(c);
    ++rec.steps[ci];
    rec.mean_total[ci] += l.total;
    rec.mean_distortion += l.distortion / iterations;
    rec.mean_rate += l.rate / iterations;
    rec.mean_encryption += l.encryption / iterations;
  }
  for (int ci = 0; ci < 4; ++ci) {
    if (rec.steps[ci]) rec.mean_total[ci] /= rec.steps[ci];
  }
  ++state_.epoch;
  rec.seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<checkpoint::NamedTensor> Trainer::optimizer_tensors() {
  std::vector<checkpoint::NamedTensor> out;
  const auto& params = adam_->params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.m/" + params[i]->name, adam_->first_moments()[i]});
    out.push_back({"adam.v/" + params[i]->name, adam_->second_moments()[i]});
  }
  return out;
}

json Trainer::state_json() const {
  std::ostringstream rng;
  rng << rng_;
  return {{"stage", state_.stage},
          {"epoch", state_.epoch},
          {"steps", state_.steps},
          {"optimizer_steps", adam_->steps()},
          {"rng", rng.str()}};
}

void Trainer::restore(const json& state, const std::vector<checkpoint::NamedTensor>& extras) {
  try {
    begin_stage(state.at("stage").get<int>());
    state_.epoch = state.at("epoch").get<int>();
    state_.steps = state.at("steps").get<long>();
    std::istringstream rng(state.at("rng").get<std::string>());
    rng >> rng_;
    if (!rng) throw DataError("bad generator state");
    auto find = [&](const std::string& name) -> const Tensor& {
      for (const auto& t : extras) {
        if (t.name == name) return t.value;
      }
      throw DataError(fmt::format("resume state lacks '{}'", name));
    };
    std::vector<Tensor> m, v;
    for (const nn::Param* p : adam_->params()) {
      m.push_back(find("adam.m/" + p->name));
      v.push_back(find("adam.v/" + p->name));
    }
    adam_->restore(state.at("optimizer_steps").get<long>(), std::move(m), std::move(v));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("bad resume state: {}", e.what()));
  }
}

void run_schedule(codec::CodecModel& model, oracle::SurrogateOracle& oracle,
                  const TrainConfig& config, const data::Dataset& data,
                  const ScheduleHooks& hooks) {
  const data::Split split = data::split_dataset(data.size(), config.heldout_fraction);
  if (split.train.size() < 2) throw DataError("training split needs at least 2 images");
  Trainer trainer(model, oracle, config);
  if (hooks.resume) trainer.restore(hooks.resume->state, hooks.resume->extras);

  const int lambda_index = model.config().lambda_index;
  const std::string prefix = config.baseline ? "baseline" : "psic";
  std::ofstream metrics;
  if (!hooks.output_dir.empty()) {
    std::filesystem::create_directories(hooks.output_dir);
    const auto path = hooks.output_dir / fmt::format("{}_l{}_metrics.jsonl", prefix, lambda_index);
    metrics.open(path, std::ios::app);
    if (!metrics) throw DataError(fmt::format("cannot write {}", path.string()));
  }

  for (int stage = trainer.state().stage; stage <= 2; ++stage) {
    if (stage != trainer.state().stage) trainer.begin_stage(stage);
    const int epochs = stage == 1 ? config.stage1_epochs : config.stage2_epochs;
    while (trainer.state().epoch < epochs) {
      const EpochRecord rec = trainer.run_epoch(data, split.train);
      if (metrics.is_open()) metrics << to_json(rec).dump() << '\n' << std::flush;
      if (hooks.on_epoch) hooks.on_epoch(rec);
      if (!hooks.output_dir.empty()) {
        checkpoint::CodecMeta meta;
        meta.stage = stage;
        meta.epoch = trainer.state().epoch;
        meta.baseline = config.baseline;
        meta.key = hooks.key;
        meta.train_state = trainer.state_json();
        meta.train_state["config"] = config;
        checkpoint::save_codec(
            hooks.output_dir / checkpoint::codec_checkpoint_name(lambda_index, stage,
                                                                 config.baseline),
            model, meta, trainer.optimizer_tensors());
      }
    }
  }
}

}  // namespace psic::train
