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

// Quality and downstream-task metrics.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "psic/oracle.hpp"
#include "psic/tensor.hpp"

namespace psic::metrics {

inline constexpr Real kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over all entries; kPsnrCap when MSE is zero.
Real psnr(const Tensor& a, const Tensor& b);
/// One PSNR per batch entry.
std::vector<Real> psnr_per_image(const Tensor& a, const Tensor& b);

enum class Direction { kTextToImage, kImageToText };

/// Per-query success flags over one gallery given its similarity matrix
/// (rows images, columns texts). A query succeeds when its single best match
/// carries the query's caption; a tie for best with any other caption fails.
std::vector<bool> recall_flags(const Matrix& similarity, std::span<const std::string> captions,
                               Direction direction);

/// Splits the pairs into consecutive galleries of `gallery` items (the last
/// one may be shorter) and returns one flag per pair. Throws ShapeError when
/// counts differ.
std::vector<bool> recall_at_1_flags(const oracle::SimilarityOracle& oracle, const Tensor& images,
                                    std::span<const std::string> captions, Direction direction,
                                    int gallery);
Real recall_at_1(const oracle::SimilarityOracle& oracle, const Tensor& images,
                 std::span<const std::string> captions, Direction direction, int gallery);

/// Prediction flags for argmax over prompt similarities. Throws DomainError on
/// a label with no prompt.
std::vector<bool> classification_flags(const oracle::SimilarityOracle& oracle,
                                       const Tensor& images, std::span<const int> labels,
                                       std::span<const std::string> prompts);
Real top1_classification(const oracle::SimilarityOracle& oracle, const Tensor& images,
                         std::span<const int> labels, std::span<const std::string> prompts);

/// |baseline & !psic| / |baseline|. Throws ShapeError on unequal lengths and
/// UndefinedMetricError when no baseline flag is set.
Real asr(const std::vector<bool>& baseline_correct, const std::vector<bool>& psic_correct);

Real fraction(const std::vector<bool>& flags);

}  // namespace psic::metrics
