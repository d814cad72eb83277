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

#include "psic/bitstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "psic/data.hpp"
#include "psic/errors.hpp"

namespace psic::bitstream {
namespace {

using CKind = ContainerError::Kind;

int to_int(Real v, const char* what) {
  if (v != std::round(v) || std::abs(v) > std::numeric_limits<std::int32_t>::max()) {
    throw DomainError(fmt::format("{} value {} is not a codable integer", what, v));
  }
  return static_cast<int>(v);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) << 24 | static_cast<std::uint32_t>(b[at + 1]) << 16 |
         static_cast<std::uint32_t>(b[at + 2]) << 8 | b[at + 3];
}

bool valid_side(std::uint32_t v) {
  return v > 0 && v <= kMaxSide && v % codec::kHyperDownsample == 0;
}

}  // namespace

// ------------------------------------------------------------- y tables

int ScaleBins::index(Real scale) {
  const Real s = std::clamp(scale, kMin, kMax);
  const Real t = std::log(s / kMin) / std::log(kMax / kMin) * (kCount - 1);
  return std::clamp(static_cast<int>(std::lround(t)), 0, kCount - 1);
}

Real ScaleBins::value(int index) {
  return kMin * std::exp(static_cast<Real>(index) / (kCount - 1) * std::log(kMax / kMin));
}

ResidualTable residual_table(Real offset, Real scale) {
  const Real s = ScaleBins::value(ScaleBins::index(scale));
  ResidualTable t;
  t.half_support = std::max(1, static_cast<int>(std::ceil(8 * s)));
  const int r = t.half_support;
  std::vector<Real> pmf(2 * r + 2);
  auto cdf = [&](Real edge) { return codec::gaussian_cdf((edge - offset) / s); };
  for (int k = -r; k <= r; ++k) pmf[k + r] = cdf(k + 0.5) - cdf(k - 0.5);
  pmf.back() = cdf(-r - 0.5) + codec::gaussian_cdf(-(r + 0.5 - offset) / s);
  t.table = rc::cdf_from_pmf(pmf);
  return t;
}

std::vector<std::uint8_t> encode_y(const Tensor& y_hat, const Tensor& means,
                                   const Tensor& scales) {
  require_same_shape(y_hat.shape(), means.shape(), "encode_y means");
  require_same_shape(y_hat.shape(), scales.shape(), "encode_y scales");
  rc::RangeEncoder enc;
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    const Real centre = std::round(means[i]);
    const ResidualTable t = residual_table(means[i] - centre, scales[i]);
    const int residual = to_int(y_hat[i] - centre, "y residual");
    if (std::abs(residual) <= t.half_support) {
      enc.encode(t.table, residual + t.half_support);
    } else {
      enc.encode(t.table, t.escape());
      const auto raw = static_cast<std::uint32_t>(residual);
      enc.encode_raw16(static_cast<std::uint16_t>(raw >> 16));
      enc.encode_raw16(static_cast<std::uint16_t>(raw & 0xFFFF));
    }
  }
  return enc.finish();
}

Tensor decode_y(std::span<const std::uint8_t> bytes, const Tensor& means, const Tensor& scales) {
  require_same_shape(means.shape(), scales.shape(), "decode_y");
  Tensor y(means.shape());
  rc::RangeDecoder dec(bytes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Real centre = std::round(means[i]);
    const ResidualTable t = residual_table(means[i] - centre, scales[i]);
    const int s = dec.decode(t.table);
    std::int64_t residual = s - t.half_support;
    if (s == t.escape()) {
      const std::uint32_t hi = dec.decode_raw16();
      const std::uint32_t lo = dec.decode_raw16();
      residual = static_cast<std::int32_t>(hi << 16 | lo);
    }
    y[i] = centre + static_cast<Real>(residual);
  }
  dec.finish();
  return y;
}

std::vector<rc::CdfTable> z_tables(const codec::ZCdfTable& table) {
  std::vector<rc::CdfTable> out;
  out.reserve(table.channels());
  std::vector<Real> pmf(table.symbols);
  for (const auto& cdf : table.cdf) {
    for (int i = 0; i < table.symbols; ++i) pmf[i] = std::max(0.0, cdf[i + 1] - cdf[i]);
    out.push_back(rc::cdf_from_pmf(pmf));
  }
  return out;
}

std::vector<std::uint8_t> encode_z(const Tensor& z_hat, const codec::ZCdfTable& table) {
  const Shape s = z_hat.shape();
  if (s.c != table.channels()) {
    throw ShapeError(fmt::format("z has {} channels, table {}", s.c, table.channels()));
  }
  const auto tables = z_tables(table);
  rc::RangeEncoder enc;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int h = 0; h < s.h; ++h) {
        for (int w = 0; w < s.w; ++w) {
          enc.encode(tables[c], to_int(z_hat.at(n, c, h, w), "z") - table.min_symbol);
        }
      }
    }
  }
  return enc.finish();
}

Tensor decode_z(std::span<const std::uint8_t> bytes, const codec::ZCdfTable& table, Shape shape) {
  if (shape.c != table.channels()) {
    throw ShapeError(fmt::format("z has {} channels, table {}", shape.c, table.channels()));
  }
  const auto tables = z_tables(table);
  Tensor z(shape);
  rc::RangeDecoder dec(bytes);
  for (int n = 0; n < shape.n; ++n) {
    for (int c = 0; c < shape.c; ++c) {
      for (int h = 0; h < shape.h; ++h) {
        for (int w = 0; w < shape.w; ++w) {
          z.at(n, c, h, w) = dec.decode(tables[c]) + table.min_symbol;
        }
      }
    }
  }
  dec.finish();
  return z;
}

// ------------------------------------------------------------ container

std::vector<std::uint8_t> Container::bytes() const {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(size());
  out.push_back(header.version);
  out.insert(out.end(), header.model_hash.begin(), header.model_hash.end());
  out.push_back(header.lambda_index);
  put_u32(out, header.height);
  put_u32(out, header.width);
  put_u32(out, static_cast<std::uint32_t>(z_payload.size()));
  put_u32(out, static_cast<std::uint32_t>(y_payload.size()));
  if (header.version == kVersionPadded) {
    put_u32(out, header.original_height);
    put_u32(out, header.original_width);
  }
  out.insert(out.end(), z_payload.begin(), z_payload.end());
  out.insert(out.end(), y_payload.begin(), y_payload.end());
  return out;
}

Container Container::parse(std::span<const std::uint8_t> b) {
  if (b.size() < kHeaderSize) {
    throw ContainerError(CKind::kLengthCorrupt,
                         fmt::format("container of {} bytes is shorter than its header", b.size()));
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), b.begin())) {
    throw ContainerError(CKind::kBadMagic, "not a PSIC container");
  }
  Container c;
  Header& h = c.header;
  h.version = b[4];
  if (h.version != kVersion && h.version != kVersionPadded) {
    throw ContainerError(CKind::kBadVersion, fmt::format("unsupported version {}", h.version));
  }
  std::copy_n(b.begin() + 5, h.model_hash.size(), h.model_hash.begin());
  h.lambda_index = b[21];
  h.height = get_u32(b, 22);
  h.width = get_u32(b, 26);
  if (!valid_side(h.height) || !valid_side(h.width)) {
    throw ContainerError(CKind::kBadDimensions,
                         fmt::format("invalid coded size {}x{}", h.height, h.width));
  }
  const std::uint64_t z_len = get_u32(b, 30);
  const std::uint64_t y_len = get_u32(b, 34);
  if (b.size() < h.size()) {
    throw ContainerError(CKind::kLengthCorrupt, "container truncated inside its header");
  }
  h.original_height = h.height;
  h.original_width = h.width;
  if (h.version == kVersionPadded) {
    h.original_height = get_u32(b, kHeaderSize);
    h.original_width = get_u32(b, kHeaderSize + 4);
    auto fits = [](std::uint32_t orig, std::uint32_t coded) {
      return orig > 0 && orig <= coded && coded - orig < codec::kHyperDownsample;
    };
    if (!fits(h.original_height, h.height) || !fits(h.original_width, h.width)) {
      throw ContainerError(CKind::kBadDimensions,
                           fmt::format("original size {}x{} inconsistent with coded {}x{}",
                                       h.original_height, h.original_width, h.height, h.width));
    }
  }
  if (z_len == 0 || y_len == 0 || h.size() + z_len + y_len != b.size()) {
    throw ContainerError(CKind::kLengthCorrupt,
                         fmt::format("declared payloads {} + {} do not match {} bytes", z_len,
                                     y_len, b.size() - h.size()));
  }
  const auto z_begin = b.begin() + static_cast<std::ptrdiff_t>(h.size());
  c.z_payload.assign(z_begin, z_begin + static_cast<std::ptrdiff_t>(z_len));
  c.y_payload.assign(z_begin + static_cast<std::ptrdiff_t>(z_len), b.end());
  return c;
}

ModelIdentity identify(codec::CodecModel& model) {
  return {hash::model_hash(model), model.config().lambda_index};
}

Container serialize(const codec::LatentCode& latents, const codec::EntropyParams& params,
                    const ModelIdentity& id, std::uint32_t height, std::uint32_t width) {
  if (latents.y_hat.shape().n != 1 || latents.z_hat.shape().n != 1) {
    throw ShapeError("a container holds exactly one image");
  }
  if (!valid_side(height) || !valid_side(width)) {
    throw DimensionError(fmt::format("cannot code a {}x{} image", height, width));
  }
  Container c;
  c.header.model_hash = id.hash;
  c.header.lambda_index = static_cast<std::uint8_t>(id.lambda_index);
  c.header.height = c.header.original_height = height;
  c.header.width = c.header.original_width = width;
  c.z_payload = encode_z(latents.z_hat, params.z_cdf);
  c.y_payload = encode_y(latents.y_hat, params.means, params.scales);
  return c;
}

codec::LatentCode deserialize(const Container& container, const codec::CodecModel& model,
                              const ModelIdentity& id) {
  const Header& h = container.header;
  if (h.model_hash != id.hash) {
    throw ContainerError(CKind::kModelMismatch,
                         fmt::format("container model {} does not match checkpoint {}",
                                     hash::to_hex(h.model_hash), hash::to_hex(id.hash)));
  }
  if (h.lambda_index != id.lambda_index) {
    throw ContainerError(CKind::kLambdaMismatch,
                         fmt::format("container lambda index {} but checkpoint has {}",
                                     h.lambda_index, id.lambda_index));
  }
  const auto& cfg = model.config();
  const Shape z_shape{1, cfg.hyper_channels, static_cast<int>(h.height / codec::kHyperDownsample),
                      static_cast<int>(h.width / codec::kHyperDownsample)};
  try {
    codec::LatentCode out;
    out.z_hat = decode_z(container.z_payload, model.z_cdf_table(), z_shape);
    const codec::EntropyParams ep = codec::entropy_params_from_z(out.z_hat, model);
    out.y_hat = decode_y(container.y_payload, ep.means, ep.scales);
    return out;
  } catch (const RangeCoderError& e) {
    throw ContainerError(CKind::kPayloadCorrupt, fmt::format("corrupt payload: {}", e.what()));
  }
}

Real measured_bpp(const Container& container) {
  const Header& h = container.header;
  return 8.0 * static_cast<Real>(container.size()) /
         (static_cast<Real>(h.original_height) * h.original_width);
}

Container compress(const Tensor& image, const codec::CodecModel& model, const ModelIdentity& id) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw DimensionError(fmt::format("expected (1,3,H,W), got {}", s.str()));
  const bool padded = s.h % codec::kHyperDownsample != 0 || s.w % codec::kHyperDownsample != 0;
  const Tensor x = padded ? data::reflect_pad(image, codec::kHyperDownsample) : image;
  const codec::EncodedLatents enc = codec::encode_latents(x, model);
  Container c = serialize(enc.latents, enc.params, id, static_cast<std::uint32_t>(x.shape().h),
                          static_cast<std::uint32_t>(x.shape().w));
  if (padded) {
    c.header.version = kVersionPadded;
    c.header.original_height = static_cast<std::uint32_t>(s.h);
    c.header.original_width = static_cast<std::uint32_t>(s.w);
  }
  return c;
}

Tensor decompress(const Container& container, const codec::CodecModel& model,
                  const ModelIdentity& id, cltg::Mode mode) {
  const codec::LatentCode latents = deserialize(container, model, id);
  const Tensor x = codec::synthesis_transform(
      latents.y_hat, cltg::generate_triggers(model.triggers(), mode), model);
  const Header& h = container.header;
  if (h.original_height == h.height && h.original_width == h.width) return x;
  return data::crop(x, static_cast<int>(h.original_height), static_cast<int>(h.original_width));
}

}  // namespace psic::bitstream
