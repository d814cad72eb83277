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

// Byte-oriented range coder with 16-bit frequency tables.
//
// 32-bit range, 64-bit low with carry propagation through a cached byte.
// A stream holding no symbols is zero bytes long; otherwise the decoder
// consumes exactly the bytes the encoder produced, which finish() checks.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "psic/tensor.hpp"

namespace psic::rc {

inline constexpr int kPrecision = 16;
inline constexpr std::uint32_t kTotal = 1u << kPrecision;

/// Cumulative frequencies: cdf[0] = 0, cdf[symbols] = 2^16, and every symbol
/// has frequency >= 1.
struct CdfTable {
  std::vector<std::uint32_t> cdf;

  int symbols() const { return static_cast<int>(cdf.size()) - 1; }
  std::uint32_t frequency(int s) const { return cdf[s + 1] - cdf[s]; }
  /// Throws RangeCoderError(kBadTable) when the invariants do not hold.
  void validate() const;
};

/// Quantizes a nonnegative pmf (need not sum to 1) to a CdfTable. Every
/// symbol receives at least one count; rounding slack goes to the most
/// probable symbol. Throws RangeCoderError(kBadTable) for an empty pmf, more
/// than 2^16 symbols, or a negative/non-finite entry.
CdfTable cdf_from_pmf(std::span<const Real> pmf);

class RangeEncoder {
 public:
  /// Throws RangeCoderError(kSymbolOutOfSupport) if `symbol` is not in the table.
  void encode(const CdfTable& table, int symbol);
  /// Codes a raw 16-bit value with uniform probability.
  void encode_raw16(std::uint16_t value);
  std::vector<std::uint8_t> finish();

 private:
  void code(std::uint32_t start, std::uint32_t freq);
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool used_ = false;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  int decode(const CdfTable& table);
  std::uint16_t decode_raw16();
  /// Throws RangeCoderError(kTruncated) unless every byte was consumed.
  void finish() const;

 private:
  void start();
  std::uint8_t next_byte();
  void normalize();
  void consume(std::uint32_t start, std::uint32_t freq);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
  bool started_ = false;
};

/// Symbol i is coded under tables[i].
std::vector<std::uint8_t> range_encode(std::span<const int> symbols,
                                       std::span<const CdfTable> tables);
std::vector<int> range_decode(std::span<const std::uint8_t> bytes,
                              std::span<const CdfTable> tables, std::size_t count);

}  // namespace psic::rc
