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

#include "psic/range_coder.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::rc {
namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr int kInitBytes = 5;

using Kind = RangeCoderError::Kind;

}  // namespace

void CdfTable::validate() const {
  if (cdf.size() < 2) throw RangeCoderError(Kind::kBadTable, "cdf table needs at least one symbol");
  if (cdf.front() != 0 || cdf.back() != kTotal) {
    throw RangeCoderError(Kind::kBadTable, "cdf table must run from 0 to 2^16");
  }
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    if (cdf[i] <= cdf[i - 1]) {
      throw RangeCoderError(Kind::kBadTable, fmt::format("symbol {} has zero frequency", i - 1));
    }
  }
}

CdfTable cdf_from_pmf(std::span<const Real> pmf) {
  const std::size_t n = pmf.size();
  if (n == 0 || n > kTotal) {
    throw RangeCoderError(Kind::kBadTable, fmt::format("cannot build a table of {} symbols", n));
  }
  Real sum = 0;
  for (Real p : pmf) {
    if (!(p >= 0) || !std::isfinite(p)) throw RangeCoderError(Kind::kBadTable, "invalid pmf entry");
    sum += p;
  }
  const Real spare = static_cast<Real>(kTotal - n);
  std::vector<std::uint32_t> freq(n, 1);
  std::uint64_t used = n;
  if (sum > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto extra = static_cast<std::uint32_t>(std::floor(pmf[i] / sum * spare));
      freq[i] += extra;
      used += extra;
    }
  }
  const std::size_t top = std::max_element(pmf.begin(), pmf.end()) - pmf.begin();
  freq[top] += static_cast<std::uint32_t>(kTotal - used);
  CdfTable t;
  t.cdf.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) t.cdf[i + 1] = t.cdf[i] + freq[i];
  return t;
}

void RangeEncoder::encode(const CdfTable& table, int symbol) {
  if (symbol < 0 || symbol >= table.symbols()) {
    throw RangeCoderError(Kind::kSymbolOutOfSupport,
                          fmt::format("symbol {} outside table of {}", symbol, table.symbols()));
  }
  code(table.cdf[symbol], table.frequency(symbol));
}

void RangeEncoder::encode_raw16(std::uint16_t value) { code(value, 1); }

void RangeEncoder::code(std::uint32_t start, std::uint32_t freq) {
  used_ = true;
  range_ >>= kPrecision;
  low_ += static_cast<std::uint64_t>(start) * range_;
  range_ *= freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (!used_) return {};
  for (int i = 0; i < kInitBytes; ++i) shift_low();
  used_ = false;
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    throw RangeCoderError(Kind::kTruncated, "range-coded stream ended early");
  }
  return bytes_[pos_++];
}

void RangeDecoder::start() {
  if (next_byte() != 0) throw RangeCoderError(Kind::kCorrupt, "range-coded stream has a bad lead byte");
  for (int i = 1; i < kInitBytes; ++i) code_ = (code_ << 8) | next_byte();
  started_ = true;
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

void RangeDecoder::consume(std::uint32_t start, std::uint32_t freq) {
  code_ -= start * range_;
  range_ *= freq;
  normalize();
}

int RangeDecoder::decode(const CdfTable& table) {
  if (!started_) start();
  range_ >>= kPrecision;
  const std::uint32_t value = code_ / range_;
  if (value >= kTotal) throw RangeCoderError(Kind::kCorrupt, "range-coded stream is corrupt");
  const auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), value);
  const int s = static_cast<int>(it - table.cdf.begin()) - 1;
  consume(table.cdf[s], table.frequency(s));
  return s;
}

std::uint16_t RangeDecoder::decode_raw16() {
  if (!started_) start();
  range_ >>= kPrecision;
  const std::uint32_t value = code_ / range_;
  if (value >= kTotal) throw RangeCoderError(Kind::kCorrupt, "range-coded stream is corrupt");
  consume(value, 1);
  return static_cast<std::uint16_t>(value);
}

void RangeDecoder::finish() const {
  if (pos_ != bytes_.size()) {
    throw RangeCoderError(Kind::kCorrupt,
                          fmt::format("{} trailing bytes after the last symbol",
                                      bytes_.size() - pos_));
  }
}

std::vector<std::uint8_t> range_encode(std::span<const int> symbols,
                                       std::span<const CdfTable> tables) {
  if (tables.size() != symbols.size()) {
    throw RangeCoderError(Kind::kBadTable, fmt::format("{} symbols but {} tables",
                                                       symbols.size(), tables.size()));
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(tables[i], symbols[i]);
  return enc.finish();
}

std::vector<int> range_decode(std::span<const std::uint8_t> bytes,
                              std::span<const CdfTable> tables, std::size_t count) {
  if (tables.size() != count) {
    throw RangeCoderError(Kind::kBadTable,
                          fmt::format("{} symbols requested but {} tables", count, tables.size()));
  }
  RangeDecoder dec(bytes);
  std::vector<int> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode(tables[i]);
  dec.finish();
  return out;
}

}  // namespace psic::rc
