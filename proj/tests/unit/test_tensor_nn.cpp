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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "psic/errors.hpp"
#include "psic/nn.hpp"
#include "support.hpp"

namespace psic {
namespace {

// Weighted sum of the output, so every output element gets its own gradient.
Real probe(const Tensor& y, const Tensor& w) {
  Real s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

void check_layer(nn::Layer& layer, Tensor x, std::mt19937_64& rng, Real tol = 1e-6) {
  const Tensor y0 = layer.forward(x);
  const Tensor w = testing::random_tensor(y0.shape(), rng);
  auto loss = [&] { return probe(layer.forward(x), w); };
  nn::zero_grad(layer.params());
  const Tensor dx = layer.backward(x, w, true);
  for (std::size_t i = 0; i < x.size(); i += 1 + x.size() / 40) {
    EXPECT_NEAR(dx[i], testing::central_difference(x, i, 1e-5, loss), tol) << "input " << i;
  }
  for (nn::Param* p : layer.params()) {
    for (std::size_t i = 0; i < p->value.size(); i += 1 + p->value.size() / 40) {
      EXPECT_NEAR(p->grad[i], testing::central_difference(p->value, i, 1e-5, loss), tol)
          << p->name << " " << i;
    }
  }
}

TEST(Tensor, SliceStackAndArithmetic) {
  std::mt19937_64 rng(1);
  const Tensor a = testing::random_tensor({3, 2, 2, 2}, rng);
  const Tensor s = a.batch_slice(1, 2);
  EXPECT_EQ(s.shape(), (Shape{2, 2, 2, 2}));
  EXPECT_EQ(s.at(0, 1, 1, 0), a.at(1, 1, 1, 0));
  const std::vector<Tensor> parts = {a.batch_slice(0, 1), a.batch_slice(1, 2)};
  const Tensor joined = stack(parts);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(joined[i], a[i]);
  Tensor b = a;
  b += a;
  b *= 0.5;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(b[i], a[i]);
  EXPECT_THROW(b += Tensor({1, 1, 1, 1}), ShapeError);
  EXPECT_THROW(a.reshaped({1, 1, 1, 7}), ShapeError);
}

TEST(Conv2d, MatchesDirectLoops) {
  std::mt19937_64 rng(2);
  nn::Conv2d conv("c", 3, 4, 5, 2, 2, rng);
  for (auto& v : conv.bias().value.values()) v = std::uniform_real_distribution<Real>(-1, 1)(rng);
  const Tensor x = testing::random_tensor({2, 3, 9, 8}, rng);
  const Tensor y = conv.forward(x);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 5, 4}));
  const Tensor& w = conv.weight().value;
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 4; ++o) {
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 4; ++j) {
          Real acc = conv.bias().value[o];
          for (int c = 0; c < 3; ++c) {
            for (int ki = 0; ki < 5; ++ki) {
              for (int kj = 0; kj < 5; ++kj) {
                const int r = 2 * i - 2 + ki, q = 2 * j - 2 + kj;
                if (r < 0 || r >= 9 || q < 0 || q >= 8) continue;
                acc += w.at(o, c, ki, kj) * x.at(n, c, r, q);
              }
            }
          }
          EXPECT_NEAR(y.at(n, o, i, j), acc, 1e-12);
        }
      }
    }
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  nn::Conv2d conv("c", 2, 3, 3, 1, 1, rng);
  check_layer(conv, testing::random_tensor({2, 2, 5, 4}, rng), rng);
  nn::Conv2d strided("s", 2, 2, 5, 2, 2, rng);
  check_layer(strided, testing::random_tensor({1, 2, 8, 8}, rng), rng);
}

TEST(ConvTranspose2d, DoublesResolutionAndIsAdjointOfConv) {
  std::mt19937_64 rng(4);
  nn::ConvTranspose2d up("u", 3, 2, rng);
  const Tensor x = testing::random_tensor({1, 3, 4, 5}, rng);
  EXPECT_EQ(up.forward(x).shape(), (Shape{1, 2, 8, 10}));
  check_layer(up, x, rng);
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  nn::Linear lin("l", 6, 4, rng);
  check_layer(lin, testing::random_tensor({3, 6, 1, 1}, rng), rng);
}

TEST(LeakyRelu, SlopeAndGradient) {
  Tensor x({1, 1, 1, 2});
  x[0] = -2;
  x[1] = 3;
  const Tensor y = nn::leaky_relu(x);
  EXPECT_DOUBLE_EQ(y[0], -2 * nn::kLeakySlope);
  EXPECT_DOUBLE_EQ(y[1], 3);
  const Tensor g = nn::leaky_relu_backward(x, Tensor(x.shape(), 1));
  EXPECT_DOUBLE_EQ(g[0], nn::kLeakySlope);
  EXPECT_DOUBLE_EQ(g[1], 1);
}

TEST(Chain, BackwardComposesLayers) {
  std::mt19937_64 rng(6);
  nn::Chain chain;
  chain.add<nn::Conv2d>("a", 2, 3, 3, 2, 1, rng);
  chain.add<nn::LeakyRelu>();
  chain.add<nn::Flatten>();
  chain.add<nn::Linear>("b", 12, 2, rng);
  Tensor x = testing::random_tensor({2, 2, 4, 4}, rng);
  nn::Chain::Trace trace;
  const Tensor y = chain.forward(x, &trace);
  const Tensor w = testing::random_tensor(y.shape(), rng);
  nn::zero_grad(chain.params());
  const Tensor dx = chain.backward(trace, w, true);
  auto loss = [&] { return probe(chain.forward(x), w); };
  for (std::size_t i = 0; i < x.size(); i += 3) {
    EXPECT_NEAR(dx[i], testing::central_difference(x, i, 1e-5, loss), 1e-6);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  nn::Param p("p", {1, 1, 1, 3});
  p.grad[0] = 2.0;
  p.grad[1] = -0.5;
  nn::Adam adam({&p}, {.learning_rate = 0.01});
  adam.step();
  // Bias-corrected first step is lr * g / (|g| + eps').
  EXPECT_NEAR(p.value[0], -0.01, 1e-8);
  EXPECT_NEAR(p.value[1], 0.01, 1e-7);
  EXPECT_EQ(p.value[2], 0.0);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, RefusesFrozenParametersWithoutSideEffects) {
  nn::Param a("a", {1, 1, 1, 2});
  nn::Param b("b", {1, 1, 1, 2});
  a.grad.fill(1);
  b.grad.fill(1);
  nn::Adam adam({&a, &b}, {});
  nn::set_frozen({&b}, true);
  EXPECT_THROW(adam.step(), FrozenParameterError);
  EXPECT_EQ(a.value[0], 0.0);
  EXPECT_EQ(adam.steps(), 0);
  nn::set_frozen({&b}, false);
  EXPECT_NO_THROW(adam.step());
}

}  // namespace
}  // namespace psic
