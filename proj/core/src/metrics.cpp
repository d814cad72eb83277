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

#include "psic/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::metrics {
namespace {

Real psnr_from_mse(Real mse) {
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

Real mean_sq(const Real* a, const Real* b, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real d = a[i] - b[i];
    acc += d * d;
  }
  return n ? acc / static_cast<Real>(n) : 0;
}

}  // namespace

Real psnr(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  return psnr_from_mse(mean_sq(a.data(), b.data(), a.size()));
}

std::vector<Real> psnr_per_image(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  const std::size_t m = a.shape().image();
  std::vector<Real> out(a.shape().n);
  for (int n = 0; n < a.shape().n; ++n) {
    out[n] = psnr_from_mse(mean_sq(a.data() + n * m, b.data() + n * m, m));
  }
  return out;
}

std::vector<bool> recall_flags(const Matrix& similarity, std::span<const std::string> captions,
                               Direction direction) {
  const Matrix s = direction == Direction::kTextToImage ? Matrix(similarity.transpose())
                                                        : similarity;
  if (s.rows() != s.cols() || static_cast<std::size_t>(s.rows()) != captions.size()) {
    throw ShapeError(fmt::format("recall: {}x{} similarity with {} captions", s.rows(), s.cols(),
                                 captions.size()));
  }
  std::vector<bool> flags(s.rows());
  for (Eigen::Index q = 0; q < s.rows(); ++q) {
    const Real best = s.row(q).maxCoeff();
    bool ok = false;
    bool foreign = false;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (s(q, j) != best) continue;
      (captions[j] == captions[q] ? ok : foreign) = true;
    }
    flags[q] = ok && !foreign;
  }
  return flags;
}

std::vector<bool> recall_at_1_flags(const oracle::SimilarityOracle& oracle, const Tensor& images,
                                    std::span<const std::string> captions, Direction direction,
                                    int gallery) {
  const int n = images.shape().n;
  if (static_cast<std::size_t>(n) != captions.size()) {
    throw ShapeError(fmt::format("recall: {} images vs {} captions", n, captions.size()));
  }
  if (gallery < 1) throw DomainError("gallery size must be positive");
  const Matrix ie = oracle.embed_images(images);
  const Matrix te = oracle.embed_texts(captions);
  std::vector<bool> flags;
  flags.reserve(n);
  for (int b = 0; b < n; b += gallery) {
    const int k = std::min(gallery, n - b);
    const Matrix s = ie.middleRows(b, k) * te.middleRows(b, k).transpose();
    const auto f = recall_flags(s, captions.subspan(b, k), direction);
    flags.insert(flags.end(), f.begin(), f.end());
  }
  return flags;
}

Real recall_at_1(const oracle::SimilarityOracle& oracle, const Tensor& images,
                 std::span<const std::string> captions, Direction direction, int gallery) {
  return fraction(recall_at_1_flags(oracle, images, captions, direction, gallery));
}

std::vector<bool> classification_flags(const oracle::SimilarityOracle& oracle,
                                       const Tensor& images, std::span<const int> labels,
                                       std::span<const std::string> prompts) {
  if (static_cast<std::size_t>(images.shape().n) != labels.size()) {
    throw ShapeError(fmt::format("classification: {} images vs {} labels", images.shape().n,
                                 labels.size()));
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= prompts.size()) {
      throw DomainError(fmt::format("label {} has no prompt among {}", l, prompts.size()));
    }
  }
  const Matrix s = oracle.embed_images(images) * oracle.embed_texts(prompts).transpose();
  std::vector<bool> flags(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Eigen::Index arg = 0;
    s.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    flags[i] = arg == labels[i];
  }
  return flags;
}

Real top1_classification(const oracle::SimilarityOracle& oracle, const Tensor& images,
                         std::span<const int> labels, std::span<const std::string> prompts) {
  return fraction(classification_flags(oracle, images, labels, prompts));
}

Real asr(const std::vector<bool>& baseline_correct, const std::vector<bool>& psic_correct) {
  if (baseline_correct.size() != psic_correct.size()) {
    throw ShapeError(fmt::format("asr: {} baseline flags vs {} flags", baseline_correct.size(),
                                 psic_correct.size()));
  }
  std::size_t denom = 0;
  std::size_t misled = 0;
  for (std::size_t i = 0; i < baseline_correct.size(); ++i) {
    if (!baseline_correct[i]) continue;
    ++denom;
    if (!psic_correct[i]) ++misled;
  }
  if (denom == 0) throw UndefinedMetricError("no baseline-correct samples; ASR is undefined");
  return static_cast<Real>(misled) / static_cast<Real>(denom);
}

Real fraction(const std::vector<bool>& flags) {
  if (flags.empty()) return 0;
  return static_cast<Real>(std::count(flags.begin(), flags.end(), true)) /
         static_cast<Real>(flags.size());
}

}  // namespace psic::metrics
