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

// Self-describing checkpoint files.
//
//   "PSICCKPT"             8 bytes
//   format version         u32 little-endian
//   header length          u64 little-endian
//   header                 JSON text; lists every tensor with name and shape
//   tensor data            little-endian doubles, in header order

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "psic/cltg.hpp"
#include "psic/codec.hpp"
#include "psic/oracle.hpp"
#include "psic/tensor.hpp"

namespace psic::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct File {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor* find(std::string_view name) const;
};

/// Writes to a sibling temporary file and renames it into place.
void write_file(const std::filesystem::path& path, const File& file);
/// Throws DataError on any structural problem.
File read_file(const std::filesystem::path& path);

/// Salted digest of the decode key. Only the digest is stored.
struct KeyDigest {
  std::string algorithm = "sha256";
  std::string salt;    // hex
  std::string digest;  // hex of sha256(salt bytes || key)

  bool matches(std::string_view key) const;
};

void to_json(nlohmann::json& j, const KeyDigest& k);
void from_json(const nlohmann::json& j, KeyDigest& k);

/// The salt is derived from `seed`, so the digest is reproducible.
KeyDigest make_key_digest(std::string_view key, std::uint64_t seed);

/// Full mode only when a key is given and matches the stored digest.
cltg::Mode mode_for_key(const std::optional<KeyDigest>& stored,
                        const std::optional<std::string>& key);

/// "psic_l{lambda_index}_s{stage}.ckpt", or "baseline_l..." for the
/// perception-only reference codec.
std::string codec_checkpoint_name(int lambda_index, int stage, bool baseline = false);

struct CodecMeta {
  int stage = 1;
  int epoch = 0;
  bool baseline = false;
  std::optional<KeyDigest> key;
  /// Opaque trainer state for resuming.
  nlohmann::json train_state;
};

struct LoadedCodec {
  std::unique_ptr<codec::CodecModel> model;
  CodecMeta meta;
  /// Tensors that are not model parameters (optimizer moments).
  std::vector<NamedTensor> extras;
};

void save_codec(const std::filesystem::path& path, codec::CodecModel& model, const CodecMeta& meta,
                const std::vector<NamedTensor>& extras = {});
LoadedCodec load_codec(const std::filesystem::path& path);

void save_oracle(const std::filesystem::path& path, oracle::SurrogateOracle& oracle);
std::unique_ptr<oracle::SurrogateOracle> load_oracle(const std::filesystem::path& path);

}  // namespace psic::checkpoint
