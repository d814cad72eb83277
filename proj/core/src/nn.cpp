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

#include "psic/nn.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::nn {
namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

struct Geometry {
  int channels, height, width, kernel, stride, padding, out_h, out_w;

  int rows() const { return channels * kernel * kernel; }
  int cols() const { return out_h * out_w; }
};

Geometry conv_geometry(int c, int h, int w, int k, int s, int p) {
  return {c, h, w, k, s, p, (h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1};
}

void im2col(const Real* img, const Geometry& g, Real* cols) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const Real* src = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        Real* dst = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          Real* row = dst + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill_n(row, g.out_w, Real{0});
            continue;
          }
          const Real* line = src + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            row[ox] = (ix >= 0 && ix < g.width) ? line[ix] : Real{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into an image buffer that the
// caller has zeroed.
void col2im(const Real* cols, const Geometry& g, Real* img) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    Real* dst = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const Real* src =
            cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          Real* line = dst + static_cast<std::size_t>(iy) * g.width;
          const Real* row = src + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) line[ix] += row[ox];
          }
        }
      }
    }
  }
}

void init_normal(Tensor& t, Real stddev, std::mt19937_64& rng) {
  std::normal_distribution<Real> dist(0.0, stddev);
  for (auto& v : t.values()) v = dist(rng);
}

Real kaiming_std(Real fan_in) {
  return std::sqrt(2.0 / ((1.0 + kLeakySlope * kLeakySlope) * fan_in));
}

void check_channels(const Tensor& x, int expected, const char* layer) {
  if (x.shape().c != expected) {
    throw ShapeError(fmt::format("{}: expected {} input channels, got {}", layer, expected,
                                 x.shape().c));
  }
}

}  // namespace

void zero_grad(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

void set_frozen(const ParamList& params, bool frozen) {
  for (auto* p : params) p->frozen = frozen;
}

ParamList concat(std::initializer_list<ParamList> lists) {
  ParamList out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  return out;
}

Tensor leaky_relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0 ? v : kLeakySlope * v;
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (x[i] <= 0) g[i] *= kLeakySlope;
  }
  return g;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel,
               int stride, int padding, std::mt19937_64& rng)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias_(name + ".bias", {1, out_channels, 1, 1}) {
  init_normal(weight_.value, kaiming_std(Real(in_channels) * kernel * kernel), rng);
}

Tensor Conv2d::forward(const Tensor& x) const {
  check_channels(x, in_, "conv2d");
  const Shape& s = x.shape();
  const Geometry g = conv_geometry(in_, s.h, s.w, kernel_, stride_, padding_);
  Tensor y({s.n, out_, g.out_h, g.out_w});
  AlignedVector cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMap w(weight_.value.data(), out_, g.rows());
  const Eigen::Map<const Vector> b(bias_.value.data(), out_);
  for (int n = 0; n < s.n; ++n) {
    im2col(x.image(n).data(), g, cols.data());
    MutMap out(y.image(n).data(), out_, g.cols());
    out.noalias() = w * ConstMap(cols.data(), g.rows(), g.cols());
    out.colwise() += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& grad_out, bool input_grad) {
  const Shape& s = x.shape();
  const Geometry g = conv_geometry(in_, s.h, s.w, kernel_, stride_, padding_);
  AlignedVector cols(static_cast<std::size_t>(g.rows()) * g.cols());
  MutMap dw(weight_.grad.data(), out_, g.rows());
  Eigen::Map<Vector> db(bias_.grad.data(), out_);
  ConstMap w(weight_.value.data(), out_, g.rows());
  Tensor dx;
  if (input_grad) dx = Tensor(s);
  for (int n = 0; n < s.n; ++n) {
    ConstMap gout(grad_out.image(n).data(), out_, g.cols());
    im2col(x.image(n).data(), g, cols.data());
    dw.noalias() += gout * ConstMap(cols.data(), g.rows(), g.cols()).transpose();
    db += gout.rowwise().sum();
    if (input_grad) {
      MutMap(cols.data(), g.rows(), g.cols()).noalias() = w.transpose() * gout;
      col2im(cols.data(), g, dx.image(n).data());
    }
  }
  return dx;
}

// ------------------------------------------------------- ConvTranspose2d

namespace {
constexpr int kUpKernel = 5;
constexpr int kUpStride = 2;
constexpr int kUpPadding = 2;
}  // namespace

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_channels, int out_channels,
                                 std::mt19937_64& rng)
    : in_(in_channels),
      out_(out_channels),
      weight_(name + ".weight", {in_channels, out_channels, kUpKernel, kUpKernel}),
      bias_(name + ".bias", {1, out_channels, 1, 1}) {
  init_normal(weight_.value,
              kaiming_std(Real(in_channels) * kUpKernel * kUpKernel / (kUpStride * kUpStride)),
              rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
  check_channels(x, in_, "conv_transpose2d");
  const Shape& s = x.shape();
  const Geometry g =
      conv_geometry(out_, 2 * s.h, 2 * s.w, kUpKernel, kUpStride, kUpPadding);
  Tensor y({s.n, out_, 2 * s.h, 2 * s.w});
  AlignedVector cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMap w(weight_.value.data(), in_, g.rows());
  for (int n = 0; n < s.n; ++n) {
    MutMap(cols.data(), g.rows(), g.cols()).noalias() =
        w.transpose() * ConstMap(x.image(n).data(), in_, g.cols());
    col2im(cols.data(), g, y.image(n).data());
    MutMap out(y.image(n).data(), out_, static_cast<Eigen::Index>(g.height) * g.width);
    out.colwise() += Eigen::Map<const Vector>(bias_.value.data(), out_);
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& x, const Tensor& grad_out, bool input_grad) {
  const Shape& s = x.shape();
  const Geometry g =
      conv_geometry(out_, 2 * s.h, 2 * s.w, kUpKernel, kUpStride, kUpPadding);
  AlignedVector cols(static_cast<std::size_t>(g.rows()) * g.cols());
  MutMap dw(weight_.grad.data(), in_, g.rows());
  Eigen::Map<Vector> db(bias_.grad.data(), out_);
  ConstMap w(weight_.value.data(), in_, g.rows());
  Tensor dx;
  if (input_grad) dx = Tensor(s);
  for (int n = 0; n < s.n; ++n) {
    ConstMap gout(grad_out.image(n).data(), out_, static_cast<Eigen::Index>(g.height) * g.width);
    db += gout.rowwise().sum();
    im2col(grad_out.image(n).data(), g, cols.data());
    ConstMap gcols(cols.data(), g.rows(), g.cols());
    dw.noalias() += ConstMap(x.image(n).data(), in_, g.cols()) * gcols.transpose();
    if (input_grad) MutMap(dx.image(n).data(), in_, g.cols()).noalias() = w * gcols;
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_features, int out_features, std::mt19937_64& rng)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", {1, 1, out_features, in_features}),
      bias_(name + ".bias", {1, out_features, 1, 1}) {
  init_normal(weight_.value, kaiming_std(in_features), rng);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.shape().image() != static_cast<std::size_t>(in_)) {
    throw ShapeError(fmt::format("linear: expected {} features, got {}", in_, x.shape().str()));
  }
  const int n = x.shape().n;
  Tensor y({n, out_, 1, 1});
  MutMap out(y.data(), n, out_);
  out.noalias() = ConstMap(x.data(), n, in_) * ConstMap(weight_.value.data(), out_, in_).transpose();
  out.rowwise() += Eigen::Map<const Vector>(bias_.value.data(), out_).transpose();
  return y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& grad_out, bool input_grad) {
  const int n = x.shape().n;
  ConstMap gout(grad_out.data(), n, out_);
  ConstMap in(x.data(), n, in_);
  MutMap(weight_.grad.data(), out_, in_).noalias() += gout.transpose() * in;
  Eigen::Map<Vector>(bias_.grad.data(), out_) += gout.colwise().sum().transpose();
  Tensor dx;
  if (input_grad) {
    dx = Tensor(x.shape());
    MutMap(dx.data(), n, in_).noalias() = gout * ConstMap(weight_.value.data(), out_, in_);
  }
  return dx;
}

// --------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x) const {
  const Shape& s = x.shape();
  return x.reshaped({s.n, static_cast<int>(s.image()), 1, 1});
}

Tensor Flatten::backward(const Tensor& x, const Tensor& grad_out, bool) {
  return grad_out.reshaped(x.shape());
}

// ----------------------------------------------------------------- Chain

Tensor Chain::forward(const Tensor& x, Trace* trace) const {
  if (trace) trace->inputs.clear();
  Tensor cur = x;
  for (const auto& layer : layers_) {
    Tensor next = layer->forward(cur);
    if (trace) trace->inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  return cur;
}

Tensor Chain::backward(const Trace& trace, const Tensor& grad_out, bool input_grad) {
  if (trace.inputs.size() != layers_.size()) {
    throw ShapeError("chain backward: trace does not match layer count");
  }
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = input_grad || i > 0;
    g = layers_[i]->backward(trace.inputs[i], g, need);
  }
  return g;
}

ParamList Chain::params() {
  ParamList out;
  for (auto& layer : layers_) {
    auto p = layer->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// ------------------------------------------------------------------ Adam

Adam::Adam(ParamList params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  for (auto* p : params_) {
    if (p->frozen) throw FrozenParameterError("attempted update of frozen parameter " + p->name);
  }
  ++steps_;
  const Real bc1 = 1.0 - std::pow(options_.beta1, static_cast<Real>(steps_));
  const Real bc2 = 1.0 - std::pow(options_.beta2, static_cast<Real>(steps_));
  const Real step_size = options_.learning_rate / bc1;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param& p = *params_[k];
    Real* m = m_[k].data();
    Real* v = v_[k].data();
    Real* w = p.value.data();
    const Real* g = p.grad.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i] / bc2) + options_.epsilon);
    }
  }
}

void Adam::restore(long steps, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw DataError("optimizer state does not match parameter list");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    require_same_shape(m[k].shape(), params_[k]->value.shape(), "adam first moment");
    require_same_shape(v[k].shape(), params_[k]->value.shape(), "adam second moment");
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace psic::nn
