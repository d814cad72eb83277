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

#include "psic/tensor.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic {

std::string Shape::str() const { return fmt::format("({},{},{},{})", n, c, h, w); }

Tensor::Tensor(Shape shape, Real fill) : shape_(shape), data_(shape.size(), fill) {}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(shape_, other.shape_, "tensor add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(Real s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.size() != data_.size()) {
    throw ShapeError(fmt::format("cannot reshape {} into {}", shape_.str(), shape.str()));
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

Tensor Tensor::batch_slice(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > shape_.n) {
    throw ShapeError(fmt::format("batch slice [{}, {}) out of range for {}", begin, begin + count,
                                 shape_.str()));
  }
  Tensor out({count, shape_.c, shape_.h, shape_.w});
  std::copy_n(data_.begin() + begin * shape_.image(), out.size(), out.data_.begin());
  return out;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) throw ShapeError(fmt::format("{}: shape {} != {}", what, a.str(), b.str()));
}

Tensor stack(std::span<const Tensor> images) {
  if (images.empty()) return {};
  Shape s = images.front().shape();
  int total = 0;
  for (const auto& t : images) {
    if (t.shape().c != s.c || t.shape().h != s.h || t.shape().w != s.w) {
      throw ShapeError(fmt::format("stack: {} vs {}", t.shape().str(), s.str()));
    }
    total += t.shape().n;
  }
  Tensor out({total, s.c, s.h, s.w});
  Real* dst = out.data();
  for (const auto& t : images) dst = std::copy(t.data(), t.data() + t.size(), dst);
  return out;
}

}  // namespace psic
