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

// SHA-256 digests of byte strings, parameter collections and models.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "psic/codec.hpp"
#include "psic/nn.hpp"

namespace psic::hash {

using Digest = std::array<std::uint8_t, 32>;
/// Truncated digest identifying a model in container headers.
using ModelHash = std::array<std::uint8_t, 16>;

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update(std::string_view text);
  /// Parameter names, shapes and little-endian IEEE-754 values.
  Sha256& update(const nn::ParamList& params);
  Digest finish();

 private:
  void* ctx_;
};

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);
Digest params_digest(const nn::ParamList& params);

/// Covers the configuration, the encoder and the entropy model. The decoder
/// and trigger generator are excluded so that decoder-only training keeps
/// existing bitstreams valid.
ModelHash model_hash(codec::CodecModel& model);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Throws DataError on malformed input.
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace psic::hash
