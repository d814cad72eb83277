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

// Uncertainty-aware encryption objective.
//
// Given a K x K image-text cosine similarity matrix S for one batch:
//
//   E[i][j]  = exp(tanh(S[i][j] / s))              bounded evidence
//   Eb       = E + E^T                             image->text plus text->image
//   U[i][j]  = Eb[i][j] / sum_k (Eb[i][k] + 1)     per-pair mass under the
//                                                  Dirichlet strength of row i
//   n(i)     = argmin_j U[i][j]                    least-supported text
//   L(i)     = -log softmax(S[i][:] / s)[n(i)]
//
// All indices are 0-based. argmin ties go to the lowest index.

#pragma once

#include <span>
#include <vector>

#include "psic/tensor.hpp"

namespace psic::uaeo {

inline constexpr Real kDefaultScale = 0.1;

/// Throws DomainError unless 0 < s < 1.
void check_scale(Real s);

Matrix evidence(const Matrix& similarity, Real s);
Matrix bidirectional(const Matrix& evidence);
Matrix uncertainty_mass(const Matrix& bidirectional_evidence);
int select_target(const Matrix& mass, int row);

struct UncertaintyTable {
  Matrix evidence;
  Matrix bidirectional;
  Matrix mass;
  Real scale = kDefaultScale;
  std::vector<int> targets;
};

/// Loss value and dL/dS for the row it was computed on.
struct LossWithGrad {
  Real loss = 0;
  std::vector<Real> grad;
};

Real uaeo_loss(std::span<const Real> similarity_row, int target, Real s);
LossWithGrad uaeo_loss_with_grad(std::span<const Real> similarity_row, int target, Real s);

/// Ablation objective: the paired similarity itself, to be minimized.
Real naive_encryption_loss(std::span<const Real> similarity_row, int paired);
LossWithGrad naive_encryption_loss_with_grad(std::span<const Real> similarity_row, int paired);

/// Binds one scale factor to both the evidence extractor and the loss
/// temperature.
class Objective {
 public:
  explicit Objective(Real scale = kDefaultScale);

  Real scale() const { return scale_; }
  UncertaintyTable table(const Matrix& similarity) const;
  LossWithGrad loss(std::span<const Real> similarity_row, int target) const {
    return uaeo_loss_with_grad(similarity_row, target, scale_);
  }

 private:
  Real scale_;
};

}  // namespace psic::uaeo
