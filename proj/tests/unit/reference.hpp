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

// Independent reference computations in 50-digit decimal arithmetic.
//
// Written loop by loop from the definitions, sharing no code with the
// library, so agreement checks the library rather than itself.

#pragma once

#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "psic/tensor.hpp"

namespace psic::reference {

using Big = boost::multiprecision::cpp_dec_float_50;
using BigMatrix = std::vector<std::vector<Big>>;

struct UncertaintyReference {
  BigMatrix evidence;
  BigMatrix bidirectional;
  BigMatrix mass;
  std::vector<Big> strength;  // sum_j bidirectional[i][j]
  std::vector<int> targets;
};

inline UncertaintyReference uncertainty(const Matrix& similarity, double scale) {
  using boost::multiprecision::exp;
  using boost::multiprecision::tanh;
  const int k = static_cast<int>(similarity.rows());
  const Big s(scale);
  UncertaintyReference r;
  r.evidence.assign(k, std::vector<Big>(k));
  r.bidirectional.assign(k, std::vector<Big>(k));
  r.mass.assign(k, std::vector<Big>(k));
  r.strength.assign(k, Big(0));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) r.evidence[i][j] = exp(tanh(Big(similarity(i, j)) / s));
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) r.bidirectional[i][j] = r.evidence[i][j] + r.evidence[j][i];
  }
  for (int i = 0; i < k; ++i) {
    Big alpha_sum = 0;
    for (int j = 0; j < k; ++j) {
      r.strength[i] += r.bidirectional[i][j];
      alpha_sum += r.bidirectional[i][j] + 1;  // Dirichlet alpha = evidence + 1
    }
    for (int j = 0; j < k; ++j) r.mass[i][j] = r.bidirectional[i][j] / alpha_sum;
  }
  r.targets.assign(k, 0);
  for (int i = 0; i < k; ++i) {
    for (int j = 1; j < k; ++j) {
      if (r.mass[i][j] < r.mass[i][r.targets[i]]) r.targets[i] = j;
    }
  }
  return r;
}

/// -log softmax(row / s)[target]
inline Big loss(const std::vector<double>& row, int target, double scale) {
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  Big z = 0;
  for (double v : row) z += exp(Big(v) / Big(scale));
  return log(z) - Big(row[target]) / Big(scale);
}

/// 10 log10(1 / mse) for images given as flat [0,1] arrays.
inline Big psnr(const std::vector<double>& a, const std::vector<double>& b) {
  using boost::multiprecision::log10;
  Big sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Big d = Big(a[i]) - Big(b[i]);
    sum += d * d;
  }
  return Big(10) * log10(Big(a.size()) / sum);
}

}  // namespace psic::reference
