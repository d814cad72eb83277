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

// Evaluation of a trained codec against a frozen similarity oracle.
//
// Tasks:
//   t2i         text-to-image retrieval R@1 within consecutive galleries
//   i2t         image-to-text retrieval R@1
//   classify    shape classification over "a photo of a {shape}" prompts
//   attributes  color, shape and position all classified correctly
//
// Every task is scored on the original images and on the full-mode and
// encrypted-mode reconstructions, plus the baseline codec's reconstructions
// when one is supplied. ASR compares encrypted-mode flags against the
// baseline's flags, or against the originals without a baseline.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psic/codec.hpp"
#include "psic/data.hpp"
#include "psic/oracle.hpp"

namespace psic::eval {

inline constexpr const char* kModeOriginal = "original";
inline constexpr const char* kModeBaseline = "baseline";
inline constexpr const char* kModeFull = "full";
inline constexpr const char* kModeEncrypted = "encrypted";

struct EvalConfig {
  int gallery = 32;
  /// "{}" is replaced by the class or attribute word.
  std::string prompt_template = "a photo of a {}";
  Real heldout_fraction = 0.2;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

struct ImageRecord {
  int index = 0;  // position in the manifest
  Real bpp = 0;   // measured from the serialized container
  Real psnr_full = 0;
  Real psnr_encrypted = 0;
};

struct TaskMetrics {
  std::map<std::string, Real> accuracy;  // by mode
  /// Unset when no sample is correct under the reference.
  std::optional<Real> asr;
};

struct EvalReport {
  int lambda_index = 0;
  nlohmann::json config;
  std::string asr_reference;  // kModeBaseline or kModeOriginal
  std::vector<ImageRecord> images;
  std::map<std::string, TaskMetrics> tasks;
  Real mean_bpp = 0;
  Real psnr_full = 0;
  Real psnr_encrypted = 0;
  std::optional<Real> psnr_baseline;
  std::optional<Real> bpp_baseline;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

/// Per-sample correctness of every task for one set of images.
std::map<std::string, std::vector<bool>> task_flags(const oracle::SimilarityOracle& oracle,
                                                    const Tensor& images,
                                                    const data::Dataset& data,
                                                    std::span<const int> indices,
                                                    const EvalConfig& config);

EvalReport evaluate(codec::CodecModel& model, codec::CodecModel* baseline,
                    const oracle::SimilarityOracle& oracle, const data::Dataset& data,
                    std::span<const int> indices, const EvalConfig& config = {});

using WarningSink = std::function<void(const std::string&)>;

/// Writes "{series}_{mode}.jsonl" files of {lambda_index, bpp, value} records
/// sorted by bpp: one per task and mode, "psnr" per decoded mode and "asr"
/// per task. Series without any value are skipped with a warning. Needs at
/// least two reports; returns the written paths.
std::vector<std::filesystem::path> export_curves(std::span<const EvalReport> reports,
                                                 const std::filesystem::path& out_dir,
                                                 const WarningSink& warn = {});

}  // namespace psic::eval
