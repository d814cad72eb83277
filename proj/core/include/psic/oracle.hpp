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

// Image-text similarity oracles.
//
// SimilarityOracle is the seam an external pretrained dual encoder plugs
// into. SurrogateOracle is a small trainable dual encoder that can also
// back-propagate a similarity gradient into its input images.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "psic/data.hpp"
#include "psic/nn.hpp"
#include "psic/tensor.hpp"

namespace psic::oracle {

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Every word the shapes corpus and its prompt templates can emit.
  static Vocabulary shapes();

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Throws DomainError for a token not in the vocabulary.
  int id(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct TextPrompt {
  std::vector<int> tokens;
  std::string raw;
};

/// Lower-cases and splits on whitespace. Throws DomainError on an unknown
/// token or an empty prompt.
TextPrompt tokenize(const Vocabulary& vocab, std::string_view raw);

class SimilarityOracle {
 public:
  virtual ~SimilarityOracle() = default;
  virtual int dim() const = 0;
  /// (N, dim) unit-norm rows.
  virtual Matrix embed_images(const Tensor& images) const = 0;
  virtual Matrix embed_texts(std::span<const std::string> texts) const = 0;

  Real similarity(const Tensor& image, const std::string& text) const;
};

/// K x K cosine matrix between the images and texts of one batch. Throws
/// ShapeError when the counts differ.
Matrix batch_similarity(const SimilarityOracle& oracle, const Tensor& images,
                        std::span<const std::string> texts);

/// Row-normalizes; returns the pre-normalization norms in `norms` if set.
Matrix normalize_rows(const Matrix& m, Vector* norms = nullptr);
/// Backward of normalize_rows given its input, output and norms.
Matrix normalize_rows_backward(const Matrix& normalized, const Vector& norms,
                               const Matrix& grad_out);

struct SurrogateConfig {
  int embed_dim = 128;
  int token_dim = 64;
  Real temperature = 0.07;
  int epochs = 20;
  int batch_size = 32;
  Real learning_rate = 2e-3;
  std::uint64_t seed = 7;
};

void to_json(nlohmann::json& j, const SurrogateConfig& c);
void from_json(const nlohmann::json& j, SurrogateConfig& c);

class SurrogateOracle final : public SimilarityOracle {
 public:
  struct ImageTrace {
    nn::Chain::Trace chain;
    Matrix raw;
    Vector norms;
    Matrix embeddings;
  };
  struct TextTrace {
    std::vector<TextPrompt> prompts;
    Matrix pooled;
    Matrix raw;
    Vector norms;
    Matrix embeddings;
  };

  SurrogateOracle(Vocabulary vocab, const SurrogateConfig& config);
  SurrogateOracle(const SurrogateOracle&) = delete;
  SurrogateOracle& operator=(const SurrogateOracle&) = delete;

  int dim() const override { return config_.embed_dim; }
  const SurrogateConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  Matrix embed_images(const Tensor& images) const override;
  Matrix embed_texts(std::span<const std::string> texts) const override;
  std::vector<Real> embed_image(const Tensor& image) const;
  std::vector<Real> embed_text(const TextPrompt& prompt) const;

  /// Images must be (N, 3, 64, 64).
  Matrix embed_images(const Tensor& images, ImageTrace* trace) const;
  Matrix embed_texts(std::span<const std::string> texts, TextTrace* trace) const;

  /// dL/dimages for dL/d(embeddings). Parameter gradients are accumulated only
  /// when `param_grads` is set.
  Tensor image_backward(const ImageTrace& trace, const Matrix& grad_embeddings,
                        bool param_grads);
  void text_backward(const TextTrace& trace, const Matrix& grad_embeddings);

  nn::ParamList params();

 private:
  SurrogateOracle(Vocabulary vocab, const SurrogateConfig& config, std::mt19937_64&& rng);

  Vocabulary vocab_;
  SurrogateConfig config_;
  nn::Chain image_encoder_;
  nn::Param token_table_;  // (1, 1, V, token_dim)
  nn::Linear text_projection_;
};

/// Symmetric contrastive loss over a batch similarity matrix. Pairs whose
/// captions coincide count as positives for each other. Returns the loss and
/// writes dL/dS.
Real contrastive_loss(const Matrix& similarity, std::span<const std::string> captions,
                      Real temperature, Matrix* grad_similarity);

struct EpochStats {
  int epoch = 0;
  Real mean_loss = 0;
};

/// Trains a fresh surrogate on `train` indices of `data`. Throws DataError if
/// fewer than 2 * batch_size training pairs are supplied.
std::unique_ptr<SurrogateOracle> train_surrogate(
    const data::Dataset& data, std::span<const int> train, const SurrogateConfig& config,
    const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace psic::oracle
