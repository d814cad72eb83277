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

#include "psic/uaeo.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::uaeo {

void check_scale(Real s) {
  if (!(s > 0 && s < 1)) throw DomainError(fmt::format("scale factor {} outside (0, 1)", s));
}

Matrix evidence(const Matrix& similarity, Real s) {
  check_scale(s);
  return similarity.unaryExpr([s](Real v) { return std::exp(std::tanh(v / s)); });
}

Matrix bidirectional(const Matrix& evidence) {
  if (evidence.rows() != evidence.cols()) {
    throw ShapeError(fmt::format("evidence matrix must be square, got {}x{}", evidence.rows(),
                                 evidence.cols()));
  }
  return evidence + evidence.transpose();
}

Matrix uncertainty_mass(const Matrix& bidirectional_evidence) {
  const Matrix& eb = bidirectional_evidence;
  if ((eb.array() < 0).any()) throw DomainError("bidirectional evidence must be nonnegative");
  Matrix u(eb.rows(), eb.cols());
  for (Eigen::Index i = 0; i < eb.rows(); ++i) {
    const Real strength = eb.row(i).sum() + static_cast<Real>(eb.cols());
    u.row(i) = eb.row(i) / strength;
  }
  return u;
}

int select_target(const Matrix& mass, int row) {
  if (row < 0 || row >= mass.rows()) {
    throw DomainError(fmt::format("row {} outside {} rows", row, mass.rows()));
  }
  if (mass.cols() == 0) throw DomainError("cannot select a target from an empty row");
  int best = 0;
  for (Eigen::Index j = 1; j < mass.cols(); ++j) {
    if (mass(row, j) < mass(row, best)) best = static_cast<int>(j);
  }
  return best;
}

LossWithGrad uaeo_loss_with_grad(std::span<const Real> similarity_row, int target, Real s) {
  check_scale(s);
  const int k = static_cast<int>(similarity_row.size());
  if (target < 0 || target >= k) {
    throw DomainError(fmt::format("target {} outside row of length {}", target, k));
  }
  Real mx = similarity_row[0] / s;
  for (Real v : similarity_row) mx = std::max(mx, v / s);
  Real sum = 0;
  std::vector<Real> p(k);
  for (int j = 0; j < k; ++j) sum += (p[j] = std::exp(similarity_row[j] / s - mx));
  LossWithGrad out;
  out.loss = std::max(0.0, mx + std::log(sum) - similarity_row[target] / s);
  out.grad.resize(k);
  for (int j = 0; j < k; ++j) out.grad[j] = (p[j] / sum - (j == target ? 1.0 : 0.0)) / s;
  return out;
}

Real uaeo_loss(std::span<const Real> similarity_row, int target, Real s) {
  return uaeo_loss_with_grad(similarity_row, target, s).loss;
}

LossWithGrad naive_encryption_loss_with_grad(std::span<const Real> similarity_row, int paired) {
  const int k = static_cast<int>(similarity_row.size());
  if (paired < 0 || paired >= k) {
    throw DomainError(fmt::format("paired index {} outside row of length {}", paired, k));
  }
  LossWithGrad out;
  out.loss = similarity_row[paired];
  out.grad.assign(k, 0.0);
  out.grad[paired] = 1.0;
  return out;
}

Real naive_encryption_loss(std::span<const Real> similarity_row, int paired) {
  return naive_encryption_loss_with_grad(similarity_row, paired).loss;
}

Objective::Objective(Real scale) : scale_(scale) { check_scale(scale); }

UncertaintyTable Objective::table(const Matrix& similarity) const {
  UncertaintyTable t;
  t.scale = scale_;
  t.evidence = evidence(similarity, scale_);
  t.bidirectional = bidirectional(t.evidence);
  t.mass = uncertainty_mass(t.bidirectional);
  t.targets.resize(similarity.rows());
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    t.targets[i] = select_target(t.mass, static_cast<int>(i));
  }
  return t;
}

}  // namespace psic::uaeo
