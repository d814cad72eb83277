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

// Entropy coding of quantized latents and the .psic container.
//
// Container layout, all integers big-endian:
//
//   offset  size  field
//        0     4  magic "PSIC"
//        4     1  version (1, or 2 when an extension block is present)
//        5    16  model hash
//       21     1  lambda index
//       22     4  coded height H (multiple of 64)
//       26     4  coded width W (multiple of 64)
//       30     4  z payload length
//       34     4  y payload length
//       38     8  version 2 only: original height, original width
//                 z payload, then y payload
//
// The decode mode is not part of the format.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "psic/cltg.hpp"
#include "psic/codec.hpp"
#include "psic/hash.hpp"
#include "psic/range_coder.hpp"
#include "psic/tensor.hpp"

namespace psic::bitstream {

// ------------------------------------------------------------- y tables

/// Log-spaced scale bins shared by encoder and decoder.
struct ScaleBins {
  static constexpr int kCount = 64;
  static constexpr Real kMin = 0.01;
  static constexpr Real kMax = 64.0;

  static int index(Real scale);
  static Real value(int index);
};

/// Table for the residual r = y_hat - round(mean) under N(mean - round(mean),
/// scale^2) with the scale snapped to its bin. Symbols 0..2R cover residuals
/// -R..R; symbol 2R+1 escapes to a raw 32-bit residual.
struct ResidualTable {
  int half_support = 0;
  rc::CdfTable table;

  int escape() const { return 2 * half_support + 1; }
};
ResidualTable residual_table(Real offset, Real scale);

std::vector<std::uint8_t> encode_y(const Tensor& y_hat, const Tensor& means,
                                   const Tensor& scales);
Tensor decode_y(std::span<const std::uint8_t> bytes, const Tensor& means, const Tensor& scales);

std::vector<rc::CdfTable> z_tables(const codec::ZCdfTable& table);
/// z_hat entries must be integers inside the table support.
std::vector<std::uint8_t> encode_z(const Tensor& z_hat, const codec::ZCdfTable& table);
Tensor decode_z(std::span<const std::uint8_t> bytes, const codec::ZCdfTable& table, Shape shape);

// ------------------------------------------------------------ container

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'S', 'I', 'C'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kVersionPadded = 2;
inline constexpr std::size_t kHeaderSize = 38;
inline constexpr std::size_t kExtensionSize = 8;
inline constexpr std::uint32_t kMaxSide = 1u << 16;

struct Header {
  std::uint8_t version = kVersion;
  hash::ModelHash model_hash{};
  std::uint8_t lambda_index = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  /// Equal to height/width unless the input was padded (version 2).
  std::uint32_t original_height = 0;
  std::uint32_t original_width = 0;

  std::size_t size() const { return kHeaderSize + (version == kVersionPadded ? kExtensionSize : 0); }
};

struct Container {
  Header header;
  std::vector<std::uint8_t> z_payload;
  std::vector<std::uint8_t> y_payload;

  std::vector<std::uint8_t> bytes() const;
  std::size_t size() const { return header.size() + z_payload.size() + y_payload.size(); }
  /// Structural parse only: magic, version, dimensions and lengths. Throws
  /// ContainerError.
  static Container parse(std::span<const std::uint8_t> bytes);
};

/// What a decoder needs to know about the loaded model.
struct ModelIdentity {
  hash::ModelHash hash{};
  int lambda_index = 0;
};

ModelIdentity identify(codec::CodecModel& model);

/// Codes one image's latents. `latents` and `params` must have batch size 1.
Container serialize(const codec::LatentCode& latents, const codec::EntropyParams& params,
                    const ModelIdentity& id, std::uint32_t height, std::uint32_t width);

/// Checks the container against the model and recovers the latents exactly.
/// Throws ContainerError (kModelMismatch, kLambdaMismatch, kPayloadCorrupt).
codec::LatentCode deserialize(const Container& container, const codec::CodecModel& model,
                              const ModelIdentity& id);

/// Measured bits per pixel of the whole container over the original pixels.
Real measured_bpp(const Container& container);

// ----------------------------------------------------- image front end

/// Any (1,3,H,W) image in [0,1]. Sides that are not multiples of 64 are
/// reflect-padded and the original size goes in a version 2 header.
Container compress(const Tensor& image, const codec::CodecModel& model, const ModelIdentity& id);
/// Decodes under `mode` and crops back to the original size.
Tensor decompress(const Container& container, const codec::CodecModel& model,
                  const ModelIdentity& id, cltg::Mode mode);

}  // namespace psic::bitstream
