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


#include <random>

#include <benchmark/benchmark.h>

#include "psic/bitstream.hpp"
#include "psic/codec.hpp"
#include "psic/nn.hpp"
#include "psic/range_coder.hpp"
#include "psic/uaeo.hpp"

namespace {

using namespace psic;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> u(0, 1);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  nn::Conv2d conv("bench", c, c, 5, 2, 2, rng);
  const Tensor x = random_tensor({8, c, 32, 32}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

void BM_RangeCoderRoundTrip(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<Real> pmf(64);
  for (std::size_t i = 0; i < pmf.size(); ++i) pmf[i] = std::exp(-0.2 * static_cast<Real>(i));
  const std::vector<rc::CdfTable> tables(n, rc::cdf_from_pmf(pmf));
  std::discrete_distribution<int> draw(pmf.begin(), pmf.end());
  std::vector<int> symbols(n);
  for (auto& s : symbols) s = draw(rng);
  for (auto _ : state) {
    const auto bytes = rc::range_encode(symbols, tables);
    benchmark::DoNotOptimize(rc::range_decode(bytes, tables, n));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_RangeCoderRoundTrip)->Arg(1 << 12)->Arg(1 << 16);

void BM_UaeoTableAndLoss(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<Real> u(-1, 1);
  Matrix s(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) s(i, j) = u(rng);
  }
  const uaeo::Objective objective;
  for (auto _ : state) {
    const auto table = objective.table(s);
    Real total = 0;
    for (int i = 0; i < k; ++i) {
      const Eigen::RowVectorXd row = s.row(i);
      total += objective.loss(std::span(row.data(), row.size()), table.targets[i]).loss;
    }
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_UaeoTableAndLoss)->Arg(32)->Arg(128);

void BM_CompressImage(benchmark::State& state) {
  codec::CodecConfig config;
  codec::CodecModel model(config, 5);
  const auto id = bitstream::identify(model);
  const Tensor x = random_tensor({1, 3, 64, 64}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(bitstream::compress(x, model, id));
}
BENCHMARK(BM_CompressImage)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  codec::CodecConfig config;
  codec::CodecModel model(config, 7);
  const Tensor x = random_tensor({static_cast<int>(state.range(0)), 3, 64, 64}, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(codec::reconstruct(x, cltg::Mode::kEncrypted, model));
  }
}
BENCHMARK(BM_Reconstruct)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
