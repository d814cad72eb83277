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

#include "psic/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "psic/errors.hpp"

namespace psic::data {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::array<std::array<Real, 3>, kColors.size()> kPalette = {{
    {0.90, 0.12, 0.10},
    {0.10, 0.78, 0.20},
    {0.15, 0.30, 0.95},
    {0.95, 0.90, 0.10},
    {0.90, 0.15, 0.85},
    {0.10, 0.85, 0.90},
}};

constexpr int kSupersample = 4;

std::array<Real, 2> anchor(int position) {
  switch (position) {
    case 0: return {32, 16};
    case 1: return {32, 48};
    case 2: return {16, 32};
    case 3: return {48, 32};
    default: return {32, 32};
  }
}

// dx, dy are offsets from the shape centre; r is its half extent.
bool inside(int shape, Real dx, Real dy, Real r) {
  const Real ax = std::abs(dx);
  const Real ay = std::abs(dy);
  switch (shape) {
    case 0: return dx * dx + dy * dy <= r * r;
    case 1: return ax <= 0.8 * r && ay <= 0.8 * r;
    case 2: return dy <= 0.8 * r && dy >= -r && ax <= (dy + r) / 1.8;
    case 3: return ax + ay <= r;
    default: return (ax <= 0.3 * r && ay <= r) || (ay <= 0.3 * r && ax <= r);
  }
}

template <std::size_t N>
int index_of(const std::array<std::string_view, N>& words, const std::string& w,
             const char* what) {
  const auto it = std::find(words.begin(), words.end(), w);
  if (it == words.end()) throw DataError(fmt::format("unknown {} '{}'", what, w));
  return static_cast<int>(it - words.begin());
}

std::uint8_t to_byte(Real v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::string caption_for(const Attributes& a) {
  return fmt::format("a {} {} on the {}", kColors.at(a.color), kShapes.at(a.shape),
                     kPositions.at(a.position));
}

std::string class_prompt(int shape) { return attribute_prompt(kShapes.at(shape)); }

std::string attribute_prompt(std::string_view value) {
  return fmt::format("a photo of a {}", value);
}

fs::path Manifest::resolve(const Record& r) const {
  fs::path p(r.image_path);
  return p.is_absolute() ? p : root / p;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open manifest {}", path.string()));
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Record r;
      r.image_path = j.at("image_path").get<std::string>();
      r.caption = j.at("caption").get<std::string>();
      r.class_label = j.at("class_label").get<int>();
      if (j.contains("attributes")) {
        const json& a = j.at("attributes");
        r.attributes.color = index_of(kColors, a.at("color").get<std::string>(), "color");
        r.attributes.shape = index_of(kShapes, a.at("shape").get<std::string>(), "shape");
        r.attributes.position =
            index_of(kPositions, a.at("position").get<std::string>(), "position");
      } else {
        r.attributes.shape = r.class_label;
      }
      m.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write manifest {}", path.string()));
  for (const auto& r : manifest.records) {
    json j;
    j["image_path"] = r.image_path;
    j["caption"] = r.caption;
    j["class_label"] = r.class_label;
    j["attributes"] = {{"color", kColors.at(r.attributes.color)},
                       {"shape", kShapes.at(r.attributes.shape)},
                       {"position", kPositions.at(r.attributes.position)}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

Tensor render(const Attributes& a, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  const Real level = 0.05 + 0.30 * unit(rng);
  std::array<Real, 3> bg{};
  for (auto& v : bg) v = std::clamp(level + 0.06 * (unit(rng) - 0.5), 0.0, 1.0);
  const Real r = 8.0 + 4.0 * unit(rng);
  auto [cy, cx] = anchor(a.position);
  cy += 6.0 * (unit(rng) - 0.5);
  cx += 6.0 * (unit(rng) - 0.5);
  const auto& fg = kPalette.at(a.color);

  Tensor img({1, 3, kImageSize, kImageSize});
  const Real step = 1.0 / kSupersample;
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const Real py = y + (sy + 0.5) * step;
          const Real px = x + (sx + 0.5) * step;
          hits += inside(a.shape, px - cx, py - cy, r) ? 1 : 0;
        }
      }
      const Real cover = static_cast<Real>(hits) / (kSupersample * kSupersample);
      for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = cover * fg[c] + (1 - cover) * bg[c];
    }
  }
  return img;
}

fs::path generate_shapes(int count, std::uint64_t seed, const fs::path& out_dir) {
  if (count < 1) throw ConfigError(fmt::format("count must be >= 1, got {}", count));
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw DataError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> color(0, kColors.size() - 1);
  std::uniform_int_distribution<int> shape(0, kShapes.size() - 1);
  std::uniform_int_distribution<int> position(0, kPositions.size() - 1);
  Manifest m;
  m.root = out_dir;
  for (int i = 0; i < count; ++i) {
    Record r;
    r.attributes = {color(rng), shape(rng), position(rng)};
    r.caption = caption_for(r.attributes);
    r.class_label = r.attributes.shape;
    r.image_path = fmt::format("images/{:06d}.ppm", i);
    save_image(out_dir / r.image_path, render(r.attributes, rng()));
    m.records.push_back(std::move(r));
  }
  const fs::path manifest_path = out_dir / "manifest.jsonl";
  write_manifest(manifest_path, m);
  return manifest_path;
}

Tensor load_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open image {}", path.string()));
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic;
  auto skip_comments = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string ignored;
      std::getline(in, ignored);
      in >> std::ws;
    }
  };
  skip_comments();
  in >> w;
  skip_comments();
  in >> h;
  skip_comments();
  in >> maxval;
  if (magic != "P6" || !in || w <= 0 || h <= 0 || maxval != 255) {
    throw DataError(fmt::format("{}: not an 8-bit binary PPM", path.string()));
  }
  in.get();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(fmt::format("{}: truncated pixel data", path.string()));
  }
  Tensor img({1, 3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(0, c, y, x) = bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
      }
    }
  }
  return img;
}

void save_image(const fs::path& path, const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError(fmt::format("save_image expects (1,3,H,W), got {}", s.str()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write image {}", path.string()));
  out << "P6\n" << s.w << ' ' << s.h << "\n255\n";
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(s.w) * s.h * 3);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        bytes[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] = to_byte(image.at(0, c, y, x));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

Tensor reflect_pad(const Tensor& image, int multiple) {
  const Shape s = image.shape();
  const int h = (s.h + multiple - 1) / multiple * multiple;
  const int w = (s.w + multiple - 1) / multiple * multiple;
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  Tensor out({s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out.at(n, c, y, x) = image.at(n, c, reflect(y, s.h), reflect(x, s.w));
        }
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& image, int height, int width) {
  const Shape s = image.shape();
  if (height > s.h || width > s.w || height < 1 || width < 1) {
    throw ShapeError(fmt::format("cannot crop {} to {}x{}", s.str(), height, width));
  }
  Tensor out({s.n, s.c, height, width});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out.at(n, c, y, x) = image.at(n, c, y, x);
      }
    }
  }
  return out;
}

Tensor Dataset::batch(std::span<const int> indices) const {
  std::vector<Tensor> picked;
  picked.reserve(indices.size());
  for (int i : indices) picked.push_back(images.at(i));
  return stack(picked);
}

std::vector<std::string> Dataset::captions(std::span<const int> indices) const {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(manifest.records.at(i).caption);
  return out;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset d;
  d.manifest = read_manifest(manifest_path);
  d.images.reserve(d.manifest.records.size());
  for (const auto& r : d.manifest.records) d.images.push_back(load_image(d.manifest.resolve(r)));
  return d;
}

Split split_dataset(std::size_t n, double heldout_fraction) {
  if (!(heldout_fraction >= 0 && heldout_fraction < 1)) {
    throw ConfigError(fmt::format("held-out fraction {} outside [0, 1)", heldout_fraction));
  }
  const auto held = static_cast<std::size_t>(std::llround(n * heldout_fraction));
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - held ? s.train : s.heldout).push_back(static_cast<int>(i));
  }
  return s;
}

}  // namespace psic::data
