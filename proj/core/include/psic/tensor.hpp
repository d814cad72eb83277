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

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace psic {

using Real = double;
/// Storage aligned for Eigen's widest packet.
using AlignedVector = std::vector<Real, Eigen::aligned_allocator<Real>>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t image() const { return static_cast<std::size_t>(c) * h * w; }

  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense NCHW array of Real. Value semantics; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  Real at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  std::span<Real> image(int n) {
    return {data_.data() + n * shape_.image(), shape_.image()};
  }
  std::span<const Real> image(int n) const {
    return {data_.data() + n * shape_.image(), shape_.image()};
  }

  void fill(Real v);
  /// Elementwise this += other; shapes must match.
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(Real s);

  /// Same storage reinterpreted with a new shape of equal size.
  Tensor reshaped(Shape shape) const;
  /// Images [begin, begin + count) along the batch axis.
  Tensor batch_slice(int begin, int count) const;

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_;
  AlignedVector data_;
};

/// Throws ShapeError naming `what` when a != b.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Concatenates single images along the batch axis.
Tensor stack(std::span<const Tensor> images);

}  // namespace psic
