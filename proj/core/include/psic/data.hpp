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

// Synthetic captioned-shapes corpus, manifest files and PPM image I/O.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psic/tensor.hpp"

namespace psic::data {

inline constexpr int kImageSize = 64;

inline constexpr std::array<std::string_view, 6> kColors = {"red",    "green",   "blue",
                                                            "yellow", "magenta", "cyan"};
inline constexpr std::array<std::string_view, 5> kShapes = {"circle", "square", "triangle",
                                                            "diamond", "cross"};
inline constexpr std::array<std::string_view, 5> kPositions = {"left", "right", "top", "bottom",
                                                               "center"};

struct Attributes {
  int color = 0;
  int shape = 0;
  int position = 0;
};

/// "a {color} {shape} on the {position}"
std::string caption_for(const Attributes& a);
/// "a photo of a {class}" for a shape class.
std::string class_prompt(int shape);
/// Same template over any attribute value word.
std::string attribute_prompt(std::string_view value);

/// One manifest line: {image_path, caption, class_label} plus the generating
/// attributes.
struct Record {
  std::string image_path;
  std::string caption;
  int class_label = 0;
  Attributes attributes;
};

struct Manifest {
  /// Directory relative image paths are resolved against.
  std::filesystem::path root;
  std::vector<Record> records;

  std::filesystem::path resolve(const Record& r) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Renders one 64x64 image for `a`. Background level, size and placement
/// jitter are drawn from `seed`.
Tensor render(const Attributes& a, std::uint64_t seed);

/// Writes `count` images plus manifest.jsonl under `out_dir`. Output bytes
/// are a pure function of (count, seed). Returns the manifest path.
std::filesystem::path generate_shapes(int count, std::uint64_t seed,
                                      const std::filesystem::path& out_dir);

/// Binary PPM (P6, maxval 255) to a (1,3,H,W) tensor in [0,1].
Tensor load_image(const std::filesystem::path& path);
/// Rounds to 8 bits and writes binary PPM.
void save_image(const std::filesystem::path& path, const Tensor& image);

/// Reflect-pads a (1,3,H,W) image so both sides become multiples of `multiple`.
Tensor reflect_pad(const Tensor& image, int multiple);
Tensor crop(const Tensor& image, int height, int width);

/// All images of a manifest held in memory, with captions.
struct Dataset {
  Manifest manifest;
  std::vector<Tensor> images;

  std::size_t size() const { return images.size(); }
  Tensor batch(std::span<const int> indices) const;
  std::vector<std::string> captions(std::span<const int> indices) const;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

struct Split {
  std::vector<int> train;
  std::vector<int> heldout;
};

/// Deterministic split: the last round(n * heldout_fraction) records are held out.
Split split_dataset(std::size_t n, double heldout_fraction);

}  // namespace psic::data
