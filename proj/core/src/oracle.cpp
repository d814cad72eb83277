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

#include "psic/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::oracle {
namespace {

constexpr int kImageFeatures = 32 * 4 * 4;

Tensor as_tensor(const Matrix& m) {
  Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols()), 1, 1});
  std::copy_n(m.data(), m.size(), t.data());
  return t;
}

Matrix as_matrix(const Tensor& t) {
  const Shape s = t.shape();
  Matrix m(s.n, static_cast<Eigen::Index>(s.image()));
  std::copy_n(t.data(), t.size(), m.data());
  return m;
}

nn::Chain make_image_encoder(int embed_dim, std::mt19937_64& rng) {
  nn::Chain chain;
  chain.add<nn::Conv2d>("oracle.image.conv0", 3, 16, 5, 2, 2, rng);
  chain.add<nn::LeakyRelu>();
  chain.add<nn::Conv2d>("oracle.image.conv1", 16, 32, 5, 2, 2, rng);
  chain.add<nn::LeakyRelu>();
  chain.add<nn::Conv2d>("oracle.image.conv2", 32, 32, 5, 2, 2, rng);
  chain.add<nn::LeakyRelu>();
  chain.add<nn::Conv2d>("oracle.image.conv3", 32, 32, 3, 2, 1, rng);
  chain.add<nn::LeakyRelu>();
  chain.add<nn::Flatten>();
  chain.add<nn::Linear>("oracle.image.proj", kImageFeatures, embed_dim, rng);
  return chain;
}

const SurrogateConfig& validated(const SurrogateConfig& c) {
  if (c.embed_dim < 1 || c.token_dim < 1 || !(c.temperature > 0)) {
    throw ConfigError("surrogate oracle dimensions and temperature must be positive");
  }
  return c;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ConfigError(fmt::format("duplicate vocabulary token '{}'", tokens_[i]));
    }
  }
}

Vocabulary Vocabulary::shapes() {
  std::vector<std::string> words = {"a", "on", "the", "photo", "of"};
  for (auto w : data::kColors) words.emplace_back(w);
  for (auto w : data::kShapes) words.emplace_back(w);
  for (auto w : data::kPositions) words.emplace_back(w);
  return Vocabulary(std::move(words));
}

int Vocabulary::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) throw DomainError(fmt::format("unknown token '{}'", token));
  return it->second;
}

TextPrompt tokenize(const Vocabulary& vocab, std::string_view raw) {
  TextPrompt p;
  p.raw = std::string(raw);
  std::string lowered(raw);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  std::istringstream words(lowered);
  std::string w;
  while (words >> w) p.tokens.push_back(vocab.id(w));
  if (p.tokens.empty()) throw DomainError("empty text prompt");
  return p;
}

Real SimilarityOracle::similarity(const Tensor& image, const std::string& text) const {
  const Matrix a = embed_images(image);
  const Matrix b = embed_texts(std::span<const std::string>(&text, 1));
  return a.row(0).dot(b.row(0));
}

Matrix batch_similarity(const SimilarityOracle& oracle, const Tensor& images,
                        std::span<const std::string> texts) {
  if (static_cast<std::size_t>(images.shape().n) != texts.size()) {
    throw ShapeError(fmt::format("batch_similarity: {} images vs {} texts", images.shape().n,
                                 texts.size()));
  }
  return oracle.embed_images(images) * oracle.embed_texts(texts).transpose();
}

Matrix normalize_rows(const Matrix& m, Vector* norms) {
  Matrix out(m.rows(), m.cols());
  if (norms) norms->resize(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Real n = std::max(m.row(i).norm(), Real{1e-12});
    out.row(i) = m.row(i) / n;
    if (norms) (*norms)(i) = n;
  }
  return out;
}

Matrix normalize_rows_backward(const Matrix& normalized, const Vector& norms,
                               const Matrix& grad_out) {
  Matrix g(grad_out.rows(), grad_out.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const Real proj = normalized.row(i).dot(grad_out.row(i));
    g.row(i) = (grad_out.row(i) - proj * normalized.row(i)) / norms(i);
  }
  return g;
}

SurrogateOracle::SurrogateOracle(Vocabulary vocab, const SurrogateConfig& config)
    : SurrogateOracle(std::move(vocab), config, std::mt19937_64(config.seed)) {}

SurrogateOracle::SurrogateOracle(Vocabulary vocab, const SurrogateConfig& config,
                                 std::mt19937_64&& rng)
    : vocab_(std::move(vocab)),
      config_(validated(config)),
      image_encoder_(make_image_encoder(config.embed_dim, rng)),
      token_table_("oracle.text.tokens",
                   {1, 1, static_cast<int>(vocab_.size()), config.token_dim}),
      text_projection_("oracle.text.proj", config.token_dim, config.embed_dim, rng) {
  if (vocab_.size() == 0) throw ConfigError("surrogate oracle needs a nonempty vocabulary");
  std::normal_distribution<Real> normal(0.0, 0.5);
  for (auto& v : token_table_.value.values()) v = normal(rng);
}

Matrix SurrogateOracle::embed_images(const Tensor& images) const {
  return embed_images(images, nullptr);
}

Matrix SurrogateOracle::embed_texts(std::span<const std::string> texts) const {
  return embed_texts(texts, nullptr);
}

std::vector<Real> SurrogateOracle::embed_image(const Tensor& image) const {
  const Matrix m = embed_images(image, nullptr);
  return {m.data(), m.data() + m.cols()};
}

std::vector<Real> SurrogateOracle::embed_text(const TextPrompt& prompt) const {
  const Matrix m = embed_texts(std::span<const std::string>(&prompt.raw, 1), nullptr);
  return {m.data(), m.data() + m.cols()};
}

Matrix SurrogateOracle::embed_images(const Tensor& images, ImageTrace* trace) const {
  const Shape s = images.shape();
  if (s.c != 3 || s.h != data::kImageSize || s.w != data::kImageSize) {
    throw DimensionError(fmt::format("oracle expects (N,3,{0},{0}) images, got {1}",
                                     data::kImageSize, s.str()));
  }
  ImageTrace local;
  ImageTrace& t = trace ? *trace : local;
  t.raw = as_matrix(image_encoder_.forward(images, trace ? &t.chain : nullptr));
  t.embeddings = normalize_rows(t.raw, &t.norms);
  return t.embeddings;
}

Matrix SurrogateOracle::embed_texts(std::span<const std::string> texts, TextTrace* trace) const {
  TextTrace local;
  TextTrace& t = trace ? *trace : local;
  const int n = static_cast<int>(texts.size());
  const int td = config_.token_dim;
  t.prompts.clear();
  t.pooled = Matrix::Zero(n, td);
  for (int i = 0; i < n; ++i) {
    t.prompts.push_back(tokenize(vocab_, texts[i]));
    for (int tok : t.prompts.back().tokens) {
      for (int d = 0; d < td; ++d) t.pooled(i, d) += token_table_.value[tok * td + d];
    }
    t.pooled.row(i) /= static_cast<Real>(t.prompts.back().tokens.size());
  }
  t.raw = as_matrix(text_projection_.forward(as_tensor(t.pooled)));
  t.embeddings = normalize_rows(t.raw, &t.norms);
  return t.embeddings;
}

Tensor SurrogateOracle::image_backward(const ImageTrace& trace, const Matrix& grad_embeddings,
                                       bool param_grads) {
  const Matrix g_raw = normalize_rows_backward(trace.embeddings, trace.norms, grad_embeddings);
  std::vector<Tensor> saved;
  if (!param_grads) {
    for (nn::Param* p : image_encoder_.params()) saved.push_back(p->grad);
  }
  Tensor gx = image_encoder_.backward(trace.chain, as_tensor(g_raw), true);
  if (!param_grads) {
    auto ps = image_encoder_.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->grad = std::move(saved[i]);
  }
  return gx;
}

void SurrogateOracle::text_backward(const TextTrace& trace, const Matrix& grad_embeddings) {
  const Matrix g_raw = normalize_rows_backward(trace.embeddings, trace.norms, grad_embeddings);
  const Tensor g_pooled =
      text_projection_.backward(as_tensor(trace.pooled), as_tensor(g_raw), true);
  const int td = config_.token_dim;
  for (std::size_t i = 0; i < trace.prompts.size(); ++i) {
    const auto& toks = trace.prompts[i].tokens;
    const Real inv = 1.0 / static_cast<Real>(toks.size());
    for (int tok : toks) {
      for (int d = 0; d < td; ++d) token_table_.grad[tok * td + d] += g_pooled[i * td + d] * inv;
    }
  }
}

nn::ParamList SurrogateOracle::params() {
  return nn::concat({image_encoder_.params(), {&token_table_}, text_projection_.params()});
}

void to_json(nlohmann::json& j, const SurrogateConfig& c) {
  j = {{"embed_dim", c.embed_dim},         {"token_dim", c.token_dim},
       {"temperature", c.temperature},     {"epochs", c.epochs},
       {"batch_size", c.batch_size},       {"learning_rate", c.learning_rate},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SurrogateConfig& c) {
  const SurrogateConfig d;
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.token_dim = j.value("token_dim", d.token_dim);
  c.temperature = j.value("temperature", d.temperature);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.seed = j.value("seed", d.seed);
}

Real contrastive_loss(const Matrix& similarity, std::span<const std::string> captions,
                      Real temperature, Matrix* grad_similarity) {
  const Eigen::Index k = similarity.rows();
  if (similarity.cols() != k || static_cast<std::size_t>(k) != captions.size()) {
    throw ShapeError("contrastive_loss: similarity must be K x K with K captions");
  }
  Matrix target(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) target(i, j) = captions[i] == captions[j] ? 1.0 : 0.0;
    target.row(i) /= target.row(i).sum();
  }
  const Matrix logits = similarity / temperature;
  Real loss = 0;
  Matrix grad = Matrix::Zero(k, k);
  auto directional = [&](const Matrix& l, const Matrix& t, Matrix& g) {
    for (Eigen::Index i = 0; i < k; ++i) {
      const Real mx = l.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (l.row(i).array() - mx).exp().matrix();
      const Real sum = e.sum();
      loss += 0.5 * (mx + std::log(sum) - t.row(i).dot(l.row(i))) / k;
      g.row(i) += 0.5 * (e / sum - t.row(i)) / static_cast<Real>(k);
    }
  };
  directional(logits, target, grad);
  Matrix grad_t = Matrix::Zero(k, k);
  directional(logits.transpose(), target.transpose(), grad_t);
  grad += grad_t.transpose();
  if (grad_similarity) *grad_similarity = grad / temperature;
  return loss;
}

std::unique_ptr<SurrogateOracle> train_surrogate(
    const data::Dataset& data, std::span<const int> train, const SurrogateConfig& config,
    const std::function<void(const EpochStats&)>& on_epoch) {
  if (config.batch_size < 2 || config.epochs < 1 || !(config.learning_rate > 0)) {
    throw ConfigError("surrogate training needs batch >= 2, epochs >= 1 and lr > 0");
  }
  if (train.size() < static_cast<std::size_t>(2 * config.batch_size)) {
    throw DataError(fmt::format("surrogate training needs at least {} pairs, got {}",
                                2 * config.batch_size, train.size()));
  }
  auto oracle = std::make_unique<SurrogateOracle>(Vocabulary::shapes(), config);
  nn::Adam adam(oracle->params(), {.learning_rate = config.learning_rate});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(train.begin(), train.end());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Real total = 0;
    int batches = 0;
    for (std::size_t b = 0; b + config.batch_size <= order.size(); b += config.batch_size) {
      std::span<const int> idx(order.data() + b, config.batch_size);
      const Tensor images = data.batch(idx);
      const auto captions = data.captions(idx);
      SurrogateOracle::ImageTrace it;
      SurrogateOracle::TextTrace tt;
      const Matrix ie = oracle->embed_images(images, &it);
      const Matrix te = oracle->embed_texts(captions, &tt);
      Matrix gs;
      const Real loss = contrastive_loss(ie * te.transpose(), captions, config.temperature, &gs);
      if (!std::isfinite(loss)) throw DivergenceError("surrogate contrastive loss is not finite");
      adam.zero_grad();
      oracle->image_backward(it, gs * te, true);
      oracle->text_backward(tt, gs.transpose() * ie);
      adam.step();
      total += loss;
      ++batches;
    }
    if (on_epoch) on_epoch({epoch, total / std::max(batches, 1)});
  }
  adam.zero_grad();
  return oracle;
}

}  // namespace psic::oracle
