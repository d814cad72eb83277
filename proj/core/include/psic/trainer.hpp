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

// Two-stage training.
//
// Stage 1 updates every parameter and alternates
//   perception   lambda * D(x, x_full) + R
//   encryption   lambda * (D(x, x_enc) + L_enc(x_enc)) + R
// Stage 2 freezes the encoder and entropy model and alternates
//   full         D(x, x_full)
//   encrypted    L_enc(x_enc)
// updating only the decoder and the trigger generator.
//
// D is 255^2 * MSE, R is bits per pixel and L_enc is the mean over the batch
// of either the uncertainty-aware objective or the naive paired similarity.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psic/checkpoint.hpp"
#include "psic/codec.hpp"
#include "psic/data.hpp"
#include "psic/nn.hpp"
#include "psic/oracle.hpp"
#include "psic/uaeo.hpp"

namespace psic::train {

enum class EncryptionLoss { kUaeo, kNaive };
/// kSplit: first half of an epoch's iterations on the first criterion, the
/// rest on the second. kInterleave: alternate every iteration.
enum class SessionPolicy { kSplit, kInterleave };

struct TrainConfig {
  codec::CodecConfig codec;
  int batch_size = 32;
  int stage1_epochs = 40;
  Real stage1_lr = 1e-3;
  int stage2_epochs = 20;
  Real stage2_lr = 1e-4;
  SessionPolicy stage1_policy = SessionPolicy::kSplit;
  SessionPolicy stage2_policy = SessionPolicy::kInterleave;
  Real uaeo_scale = uaeo::kDefaultScale;
  EncryptionLoss loss = EncryptionLoss::kUaeo;
  /// Perception-only reference codec: every iteration runs the first
  /// criterion of its stage.
  bool baseline = false;
  std::uint64_t seed = 1;
  Real heldout_fraction = 0.2;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults. Throws ConfigError on bad values.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct StepLosses {
  Real distortion = 0;  // 255^2 * MSE on the branch that was trained
  Real rate = 0;        // bits per pixel, 0 in stage 2
  Real encryption = 0;  // encryption objective, 0 on perception steps
  Real total = 0;
};

enum class Criterion { kS1Perception, kS1Encryption, kS2Full, kS2Encrypted };
std::string_view to_string(Criterion c);

/// Criterion for iteration `i` of an epoch with `iterations` iterations.
Criterion schedule_criterion(int stage, SessionPolicy policy, bool baseline, int i,
                             int iterations);

struct EpochRecord {
  int stage = 1;
  int epoch = 0;  // 0-based within the stage
  int steps[4] = {0, 0, 0, 0};
  Real mean_total[4] = {0, 0, 0, 0};
  Real mean_distortion = 0;
  Real mean_rate = 0;
  Real mean_encryption = 0;
  Real seconds = 0;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainState {
  int stage = 1;
  /// Completed epochs in the current stage.
  int epoch = 0;
  long steps = 0;
};

class Trainer {
 public:
  Trainer(codec::CodecModel& model, oracle::SurrogateOracle& oracle, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const TrainState& state() const { return state_; }
  codec::CodecModel& model() { return model_; }

  /// Enters `stage`: sets the freeze mask and starts a fresh optimizer.
  void begin_stage(int stage);

  StepLosses step_s1_perception(const Tensor& batch);
  StepLosses step_s1_encryption(const Tensor& batch, std::span<const std::string> texts);
  StepLosses step_s2_full(const Tensor& batch);
  StepLosses step_s2_encrypted(const Tensor& batch, std::span<const std::string> texts);
  StepLosses step(Criterion c, const Tensor& batch, std::span<const std::string> texts);

  /// Loss and dL/dx_enc of the configured encryption objective.
  Real encryption_loss(const Tensor& originals, const Tensor& reconstructions,
                       std::span<const std::string> texts, Tensor* grad);

  /// One epoch over `train` in an order drawn from the trainer's generator.
  EpochRecord run_epoch(const data::Dataset& data, std::span<const int> train);

  /// Optimizer moments and generator state for a resumable checkpoint.
  std::vector<checkpoint::NamedTensor> optimizer_tensors();
  nlohmann::json state_json() const;
  void restore(const nlohmann::json& state, const std::vector<checkpoint::NamedTensor>& extras);

 private:
  void require_stage(int stage, const char* step) const;
  void guard(const StepLosses& l, const char* step) const;
  void finish_step();

  codec::CodecModel& model_;
  oracle::SurrogateOracle& oracle_;
  TrainConfig config_;
  TrainState state_;
  std::optional<nn::Adam> adam_;
  std::mt19937_64 rng_;
};

struct ScheduleHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Directory receiving per-stage checkpoints and metrics.jsonl; empty for
  /// none.
  std::filesystem::path output_dir;
  std::optional<checkpoint::KeyDigest> key;
  /// State and optimizer tensors of a checkpoint to continue from; the model
  /// passed to run_schedule must already hold that checkpoint's parameters.
  struct Resume {
    nlohmann::json state;
    std::vector<checkpoint::NamedTensor> extras;
  };
  std::optional<Resume> resume;
};

/// Runs stage 1 then stage 2 on the training split of `data`. Throws
/// DivergenceError on a non-finite loss.
void run_schedule(codec::CodecModel& model, oracle::SurrogateOracle& oracle,
                  const TrainConfig& config, const data::Dataset& data,
                  const ScheduleHooks& hooks = {});

}  // namespace psic::train
