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

// Generators and numeric helpers shared by the unit tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "psic/codec.hpp"
#include "psic/tensor.hpp"

namespace psic::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, Real lo = -1, Real hi = 1) {
  std::uniform_real_distribution<Real> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline Tensor random_image(int n, int h, int w, std::mt19937_64& rng) {
  return random_tensor({n, 3, h, w}, rng, 0, 1);
}

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, Real lo = -1, Real hi = 1) {
  std::uniform_real_distribution<Real> u(lo, hi);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

/// Same shape and bitwise-identical values.
inline bool identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.values(), b.values());
}

inline Real relative_error(Real a, Real b, Real floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f at t[i].
inline Real central_difference(Tensor& t, std::size_t i, Real h, const std::function<Real()>& f) {
  const Real saved = t[i];
  t[i] = saved + h;
  const Real up = f();
  t[i] = saved - h;
  const Real down = f();
  t[i] = saved;
  return (up - down) / (2 * h);
}

/// Small codec for fast tests.
inline codec::CodecConfig tiny_codec_config(int lambda_index = 0) {
  codec::CodecConfig c;
  c.channels = 8;
  c.latent_channels = 8;
  c.hyper_channels = 8;
  c.embed_dim = 8;
  c.z_half_support = 8;
  c.lambda_index = lambda_index;
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("psic_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace psic::testing
