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

#include "psic/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "psic/errors.hpp"

namespace psic::codec {
namespace {

constexpr Real kLn2 = std::numbers::ln2_v<Real>;
constexpr Real kInvSqrt2 = 0.70710678118654752440;
constexpr Real kInvSqrt2Pi = 0.39894228040143267794;

Real gaussian_pdf(Real x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

Real softplus(Real x) { return x > 30 ? x : std::log1p(std::exp(x)); }
Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

Real round_half_away(Real v) { return std::round(v); }

/// Splits the hyper synthesis output into means and floored softplus scales.
void split_entropy_output(const Tensor& raw, int latent_channels, Tensor& means, Tensor& scales,
                          Tensor* scale_raw) {
  const Shape& s = raw.shape();
  const Shape half{s.n, latent_channels, s.h, s.w};
  means = Tensor(half);
  scales = Tensor(half);
  if (scale_raw) *scale_raw = Tensor(half);
  const std::size_t block = half.image();
  for (int n = 0; n < s.n; ++n) {
    const Real* src = raw.image(n).data();
    std::copy_n(src, block, means.image(n).data());
    Real* dst = scales.image(n).data();
    for (std::size_t i = 0; i < block; ++i) {
      dst[i] = std::max(softplus(src[block + i]), kScaleFloor);
      if (scale_raw) scale_raw->image(n)[i] = src[block + i];
    }
  }
}

std::vector<Real> softmax_row(const Real* logits, int count) {
  std::vector<Real> p(count);
  const Real mx = *std::max_element(logits, logits + count);
  Real sum = 0;
  for (int i = 0; i < count; ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

// ----------------------------------------------------------- CodecConfig

Real CodecConfig::lambda() const {
  validate();
  return lambdas[lambda_index];
}

void CodecConfig::validate() const {
  if (channels <= 0 || latent_channels <= 0 || hyper_channels <= 0 || embed_dim <= 0) {
    throw ConfigError("codec widths must be positive");
  }
  if (z_half_support <= 0) throw ConfigError("z_half_support must be positive");
  if (lambdas.empty()) throw ConfigError("lambda set is empty");
  for (Real l : lambdas) {
    if (!(l > 0)) throw ConfigError("every lambda must be > 0");
  }
  if (lambda_index < 0 || lambda_index >= static_cast<int>(lambdas.size())) {
    throw ConfigError(fmt::format("lambda index {} outside configured set of {}", lambda_index,
                                  lambdas.size()));
  }
}

void to_json(nlohmann::json& j, const CodecConfig& c) {
  j = nlohmann::json{{"channels", c.channels},
                     {"latent_channels", c.latent_channels},
                     {"hyper_channels", c.hyper_channels},
                     {"embed_dim", c.embed_dim},
                     {"z_half_support", c.z_half_support},
                     {"lambdas", c.lambdas},
                     {"lambda_index", c.lambda_index}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
  CodecConfig d;
  c.channels = j.value("channels", d.channels);
  c.latent_channels = j.value("latent_channels", d.latent_channels);
  c.hyper_channels = j.value("hyper_channels", d.hyper_channels);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.z_half_support = j.value("z_half_support", d.z_half_support);
  c.lambdas = j.value("lambdas", d.lambdas);
  c.lambda_index = j.value("lambda_index", d.lambda_index);
}

void validate_image(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.c != 3) throw DimensionError(fmt::format("expected 3 channels, got {}", s.str()));
  if (s.n < 1 || s.h <= 0 || s.w <= 0 || s.h % kHyperDownsample != 0 ||
      s.w % kHyperDownsample != 0) {
    throw DimensionError(
        fmt::format("image {} must have H and W as positive multiples of {}", s.str(),
                    kHyperDownsample));
  }
  for (Real v : x.values()) {
    if (!(v >= 0 && v <= 1)) throw DomainError("image entries must lie in [0,1]");
  }
}

Tensor quantize(const Tensor& v, QuantizeMode mode, std::mt19937_64* rng) {
  Tensor out = v;
  if (mode == QuantizeMode::kInferRound) {
    for (auto& x : out.values()) x = round_half_away(x);
    return out;
  }
  if (!rng) throw DomainError("train_noise quantization needs a random generator");
  std::uniform_real_distribution<Real> noise(-0.5, 0.5);
  for (auto& x : out.values()) x += noise(*rng);
  return out;
}

// -------------------------------------------------------------- ZCdfTable

ZCdfTable ZCdfTable::uniform(int channels, int min_symbol, int symbols) {
  ZCdfTable t{min_symbol, symbols, {}};
  t.cdf.assign(channels, std::vector<Real>(symbols + 1));
  for (auto& row : t.cdf) {
    for (int i = 0; i <= symbols; ++i) row[i] = Real(i) / symbols;
  }
  return t;
}

Real ZCdfTable::probability(int c, Real value) const {
  const Real k = value - min_symbol;
  if (k < 0 || k >= symbols || k != std::floor(k)) return 0;
  const auto i = static_cast<std::size_t>(k);
  return cdf[c][i + 1] - cdf[c][i];
}

// ---------------------------------------------------- SynthesisTransform

SynthesisTransform::SynthesisTransform(int latent_channels, int channels,
                                       std::mt19937_64& rng) {
  depths_ = {latent_channels, channels, channels, channels};
  const int outs[] = {channels, channels, channels, 3};
  for (std::size_t k = 0; k < depths_.size(); ++k) {
    layers_.emplace_back(fmt::format("synthesis.up{}", k), depths_[k], outs[k], rng);
  }
}

Tensor SynthesisTransform::forward(const Tensor& y_hat, const cltg::TriggerStack& triggers,
                                   const cltg::TriggerGenerator& generator, Trace* trace) const {
  if (triggers.size() != layers_.size() || generator.block_count() != layers_.size()) {
    throw ShapeError(fmt::format("trigger stack has {} entries for {} decoder blocks",
                                 triggers.size(), layers_.size()));
  }
  if (trace) {
    trace->fused.clear();
    trace->pre.clear();
  }
  Tensor cur = y_hat;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Tensor fused = cltg::fuse(cur, triggers[k], generator.block(k).channel_weights());
    Tensor pre = layers_[k].forward(fused);
    cur = (k + 1 < layers_.size()) ? nn::leaky_relu(pre) : pre;
    if (trace) {
      trace->fused.push_back(std::move(fused));
      trace->pre.push_back(std::move(pre));
    }
  }
  return cur;
}

Tensor SynthesisTransform::backward(const Trace& trace, const Tensor& grad_out,
                                    const cltg::TriggerStack& triggers,
                                    cltg::TriggerGenerator& generator,
                                    std::vector<std::vector<Real>>& grad_triggers,
                                    bool input_grad) {
  grad_triggers.assign(layers_.size(), {});
  Tensor g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size()) g = nn::leaky_relu_backward(trace.pre[k], g);
    g = layers_[k].backward(trace.fused[k], g, true);
    auto& block = generator.block(k);
    auto fg = cltg::fuse_backward(g, triggers[k], block.channel_weights());
    grad_triggers[k] = std::move(fg.trigger);
    Real* wg = block.channel_weight().grad.data();
    for (std::size_t c = 0; c < fg.channel_weights.size(); ++c) wg[c] += fg.channel_weights[c];
  }
  if (!input_grad) return {};
  return g;
}

nn::ParamList SynthesisTransform::params() {
  nn::ParamList out;
  for (auto& l : layers_) {
    auto p = l.params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// ------------------------------------------------------------ CodecModel

namespace {

const CodecConfig& validated(const CodecConfig& config) {
  config.validate();
  return config;
}

nn::Chain make_analysis(const CodecConfig& config, std::mt19937_64& rng) {
  const int n = config.channels;
  nn::Chain c;
  c.add<nn::Conv2d>("analysis.conv0", 3, n, 5, 2, 2, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::Conv2d>("analysis.conv1", n, n, 5, 2, 2, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::Conv2d>("analysis.conv2", n, n, 5, 2, 2, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::Conv2d>("analysis.conv3", n, config.latent_channels, 5, 2, 2, rng);
  return c;
}

nn::Chain make_hyper_analysis(const CodecConfig& config, std::mt19937_64& rng) {
  const int n = config.channels;
  nn::Chain c;
  c.add<nn::Conv2d>("hyper_analysis.conv0", config.latent_channels, n, 3, 1, 1, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::Conv2d>("hyper_analysis.conv1", n, n, 5, 2, 2, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::Conv2d>("hyper_analysis.conv2", n, config.hyper_channels, 5, 2, 2, rng);
  return c;
}

nn::Chain make_hyper_synthesis(const CodecConfig& config, std::mt19937_64& rng) {
  const int n = config.channels;
  nn::Chain c;
  c.add<nn::ConvTranspose2d>("hyper_synthesis.up0", config.hyper_channels, n, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::ConvTranspose2d>("hyper_synthesis.up1", n, n, rng);
  c.add<nn::LeakyRelu>();
  c.add<nn::Conv2d>("hyper_synthesis.conv2", n, 2 * config.latent_channels, 3, 1, 1, rng);
  return c;
}

}  // namespace

CodecModel::CodecModel(const CodecConfig& config, std::uint64_t seed)
    : CodecModel(config, std::mt19937_64(seed)) {}

CodecModel::CodecModel(const CodecConfig& config, std::mt19937_64&& rng)
    : config_(validated(config)),
      analysis_(make_analysis(config_, rng)),
      hyper_analysis_(make_hyper_analysis(config_, rng)),
      hyper_synthesis_(make_hyper_synthesis(config_, rng)),
      z_logits_("entropy.z_logits",
                {1, config_.hyper_channels, 1, 2 * config_.z_half_support + 1}),
      synthesis_(config_.latent_channels, config_.channels, rng),
      triggers_(config_.embed_dim, synthesis_.block_depths(), rng) {}

nn::ParamList CodecModel::encoder_params() { return analysis_.params(); }

nn::ParamList CodecModel::entropy_params() {
  return nn::concat({hyper_analysis_.params(), hyper_synthesis_.params(), {&z_logits_}});
}

nn::ParamList CodecModel::decoder_params() {
  return nn::concat({synthesis_.params(), triggers_.params()});
}

nn::ParamList CodecModel::all_params() {
  return nn::concat({encoder_params(), entropy_params(), decoder_params()});
}

ZCdfTable CodecModel::z_cdf_table() const {
  ZCdfTable t{z_min_symbol(), z_symbols(), {}};
  const int channels = config_.hyper_channels;
  t.cdf.reserve(channels);
  for (int c = 0; c < channels; ++c) {
    auto p = softmax_row(z_logits_.value.data() + static_cast<std::size_t>(c) * t.symbols,
                         t.symbols);
    std::vector<Real> row(t.symbols + 1, 0.0);
    for (int i = 0; i < t.symbols; ++i) row[i + 1] = row[i] + p[i];
    row.back() = 1.0;
    t.cdf.push_back(std::move(row));
  }
  return t;
}

// ------------------------------------------------------------ operations

Tensor analysis_transform(const Tensor& x, const CodecModel& model) {
  validate_image(x);
  return model.analysis().forward(x);
}

EntropyParams entropy_params_from_z(const Tensor& z_hat, const CodecModel& model) {
  EntropyParams ep;
  Tensor raw = model.hyper_synthesis().forward(z_hat);
  split_entropy_output(raw, model.config().latent_channels, ep.means, ep.scales, nullptr);
  ep.z_cdf = model.z_cdf_table();
  return ep;
}

HyperOutput hyper_path(const Tensor& y, const CodecModel& model) {
  HyperOutput out;
  out.z = model.hyper_analysis().forward(y);
  out.z_hat = quantize(out.z, QuantizeMode::kInferRound);
  const Real lo = model.z_min_symbol();
  const Real hi = lo + model.z_symbols() - 1;
  for (auto& v : out.z_hat.values()) v = std::clamp(v, lo, hi);
  out.params = entropy_params_from_z(out.z_hat, model);
  return out;
}

Real gaussian_cdf(Real x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

Real discretized_gaussian_likelihood(Real v, Real mean, Real scale) {
  // Evaluate on the lower tail for accuracy far from the mean.
  const Real d = std::abs(v - mean);
  const Real s = std::max(scale, kScaleFloor);
  const Real l = gaussian_cdf((0.5 - d) / s) - gaussian_cdf((-0.5 - d) / s);
  return std::clamp(l, kLikelihoodFloor, 1.0);
}

RateWithGrad gaussian_bits(const Tensor& values, const Tensor& means, const Tensor& scales,
                           bool with_grad) {
  require_same_shape(values.shape(), means.shape(), "rate: means");
  require_same_shape(values.shape(), scales.shape(), "rate: scales");
  RateWithGrad r;
  if (with_grad) {
    r.grad_values = Tensor(values.shape());
    r.grad_means = Tensor(values.shape());
    r.grad_scales = Tensor(values.shape());
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Real s = std::max(scales[i], kScaleFloor);
    const Real d = values[i] - means[i];
    const Real ad = std::abs(d);
    const Real raw = gaussian_cdf((0.5 - ad) / s) - gaussian_cdf((-0.5 - ad) / s);
    const Real l = std::clamp(raw, kLikelihoodFloor, 1.0);
    r.bits -= std::log2(l);
    if (!with_grad || raw <= kLikelihoodFloor || raw >= 1.0) continue;
    const Real hi = (d + 0.5) / s;
    const Real lo = (d - 0.5) / s;
    const Real ph = gaussian_pdf(hi);
    const Real pl = gaussian_pdf(lo);
    const Real dl_dd = (ph - pl) / s;
    const Real dl_ds = -(ph * hi - pl * lo) / s;
    const Real dbits_dl = -1.0 / (l * kLn2);
    r.grad_values[i] = dbits_dl * dl_dd;
    r.grad_means[i] = -dbits_dl * dl_dd;
    r.grad_scales[i] = scales[i] > kScaleFloor ? dbits_dl * dl_ds : 0.0;
  }
  return r;
}

TableRateWithGrad z_table_bits(const Tensor& values, const nn::Param& logits, int min_symbol,
                               bool with_grad) {
  const Shape& s = values.shape();
  const int symbols = logits.value.shape().w;
  if (logits.value.shape().c != s.c) {
    throw ShapeError(fmt::format("z table has {} channels, values have {}",
                                 logits.value.shape().c, s.c));
  }
  TableRateWithGrad r;
  std::vector<std::vector<Real>> probs(s.c);
  std::vector<std::vector<Real>> dprob;
  for (int c = 0; c < s.c; ++c) {
    probs[c] = softmax_row(logits.value.data() + static_cast<std::size_t>(c) * symbols, symbols);
  }
  if (with_grad) {
    r.grad_values = Tensor(s);
    r.grad_logits = Tensor(logits.value.shape());
    dprob.assign(s.c, std::vector<Real>(symbols, 0.0));
  }
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const auto& p = probs[c];
      for (std::size_t k = 0; k < plane; ++k) {
        const std::size_t idx = (static_cast<std::size_t>(n) * s.c + c) * plane + k;
        const Real a = values[idx] - min_symbol;
        const Real fl = std::floor(a);
        const Real f = a - fl;
        const long i = static_cast<long>(fl);
        const Real p0 = (i >= 0 && i < symbols) ? p[i] : 0.0;
        const Real p1 = (i + 1 >= 0 && i + 1 < symbols) ? p[i + 1] : 0.0;
        const Real raw = (1.0 - f) * p0 + f * p1;
        const Real l = std::clamp(raw, kLikelihoodFloor, 1.0);
        r.bits -= std::log2(l);
        if (!with_grad || raw <= kLikelihoodFloor) continue;
        const Real dbits_dl = -1.0 / (l * kLn2);
        r.grad_values[idx] = dbits_dl * (p1 - p0);
        if (i >= 0 && i < symbols) dprob[c][i] += dbits_dl * (1.0 - f);
        if (i + 1 >= 0 && i + 1 < symbols) dprob[c][i + 1] += dbits_dl * f;
      }
    }
  }
  if (with_grad) {
    for (int c = 0; c < s.c; ++c) {
      const auto& p = probs[c];
      Real dot = 0;
      for (int j = 0; j < symbols; ++j) dot += p[j] * dprob[c][j];
      Real* g = r.grad_logits.data() + static_cast<std::size_t>(c) * symbols;
      for (int j = 0; j < symbols; ++j) g[j] = p[j] * (dprob[c][j] - dot);
    }
  }
  return r;
}

Real rate_estimate(const LatentCode& latents, const EntropyParams& ep) {
  require_same_shape(latents.y_hat.shape(), ep.means.shape(), "rate_estimate: y_hat vs means");
  require_same_shape(latents.y_hat.shape(), ep.scales.shape(), "rate_estimate: y_hat vs scales");
  Real bits = 0;
  for (std::size_t i = 0; i < latents.y_hat.size(); ++i) {
    bits -= std::log2(discretized_gaussian_likelihood(latents.y_hat[i], ep.means[i], ep.scales[i]));
  }
  const Shape& zs = latents.z_hat.shape();
  if (zs.size() == 0) return bits;
  if (zs.c != ep.z_cdf.channels()) {
    throw ShapeError(fmt::format("rate_estimate: z has {} channels, table has {}", zs.c,
                                 ep.z_cdf.channels()));
  }
  const std::size_t plane = zs.plane();
  for (int n = 0; n < zs.n; ++n) {
    for (int c = 0; c < zs.c; ++c) {
      for (std::size_t k = 0; k < plane; ++k) {
        const Real p = ep.z_cdf.probability(c, latents.z_hat.image(n)[c * plane + k]);
        bits -= std::log2(std::clamp(p, kLikelihoodFloor, 1.0));
      }
    }
  }
  return bits;
}

Tensor clamp_unit(const Tensor& v) {
  Tensor out = v;
  for (auto& x : out.values()) x = std::clamp(x, Real{0}, Real{1});
  return out;
}

Tensor clamp_unit_backward(const Tensor& pre, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (pre[i] >= 1 && g[i] < 0) g[i] = 0;
    if (pre[i] <= 0 && g[i] > 0) g[i] = 0;
  }
  return g;
}

Tensor synthesis_transform(const Tensor& y_hat, const cltg::TriggerStack& triggers,
                           const CodecModel& model) {
  return clamp_unit(model.synthesis().forward(y_hat, triggers, model.triggers()));
}

EncodedLatents encode_latents(const Tensor& x, const CodecModel& model) {
  Tensor y = analysis_transform(x, model);
  HyperOutput h = hyper_path(y, model);
  return {{quantize(y, QuantizeMode::kInferRound), std::move(h.z_hat)}, std::move(h.params)};
}

Tensor reconstruct(const Tensor& x, cltg::Mode mode, const CodecModel& model) {
  Tensor y_hat = quantize(analysis_transform(x, model), QuantizeMode::kInferRound);
  return synthesis_transform(y_hat, model.triggers().generate(mode), model);
}

Real mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  Real sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real d = a[i] - b[i];
    sum += d * d;
  }
  return a.size() ? sum / static_cast<Real>(a.size()) : 0.0;
}

// ---------------------------------------------------------- TrainingPass

TrainingPass::TrainingPass(CodecModel& model, const Tensor& x, cltg::Mode mode,
                           bool train_encoder, std::mt19937_64& rng)
    : model_(model), mode_(mode), train_encoder_(train_encoder), image_shape_(x.shape()) {
  validate_image(x);
  if (train_encoder_) {
    y_ = model_.analysis().forward(x, &analysis_trace_);
    Tensor z = model_.hyper_analysis().forward(y_, &hyper_a_trace_);
    z_rate_ = z_table_bits(quantize(z, QuantizeMode::kTrainNoise, &rng), model_.z_logits(),
                           model_.z_min_symbol(), true);
    Tensor z_hat = quantize(z, QuantizeMode::kInferRound);
    const Real lo = model_.z_min_symbol();
    const Real hi = lo + model_.z_symbols() - 1;
    for (auto& v : z_hat.values()) v = std::clamp(v, lo, hi);
    Tensor raw = model_.hyper_synthesis().forward(z_hat, &hyper_s_trace_);
    Tensor means, scales;
    split_entropy_output(raw, model_.config().latent_channels, means, scales, &scale_raw_);
    y_rate_ = gaussian_bits(quantize(y_, QuantizeMode::kTrainNoise, &rng), means, scales, true);
    y_rate_.grad_scales = [&] {
      // Chain through the floored softplus so backward() sees d/draw.
      Tensor g = y_rate_.grad_scales;
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = scales[i] > kScaleFloor ? g[i] * sigmoid(scale_raw_[i]) : 0.0;
      }
      return g;
    }();
  } else {
    y_ = model_.analysis().forward(x);
  }
  y_hat_ = quantize(y_, QuantizeMode::kInferRound);
  triggers_ = model_.triggers().generate(mode_, &trigger_trace_);
  out_pre_clamp_ = model_.synthesis().forward(y_hat_, triggers_, model_.triggers(),
                                              &synthesis_trace_);
  x_hat_ = clamp_unit(out_pre_clamp_);
}

Real TrainingPass::bits_per_pixel() const {
  return rate_bits() / (static_cast<Real>(image_shape_.n) * image_shape_.h * image_shape_.w);
}

void TrainingPass::backward(const Tensor& grad_recon, Real grad_bits) {
  Tensor g_pre = clamp_unit_backward(out_pre_clamp_, grad_recon);
  std::vector<std::vector<Real>> g_trig;
  Tensor g_y = model_.synthesis().backward(synthesis_trace_, g_pre, triggers_, model_.triggers(),
                                           g_trig, train_encoder_);
  model_.triggers().backward(trigger_trace_, g_trig);
  if (!train_encoder_) return;

  // Straight-through rounding: dy_hat/dy = 1.
  for (std::size_t i = 0; i < g_y.size(); ++i) g_y[i] += grad_bits * y_rate_.grad_values[i];

  const Shape& ys = y_.shape();
  const int cy = model_.config().latent_channels;
  Tensor g_raw({ys.n, 2 * cy, ys.h, ys.w});
  const std::size_t block = static_cast<std::size_t>(cy) * ys.h * ys.w;
  for (int n = 0; n < ys.n; ++n) {
    Real* dst = g_raw.image(n).data();
    const Real* gm = y_rate_.grad_means.image(n).data();
    const Real* gs = y_rate_.grad_scales.image(n).data();
    for (std::size_t i = 0; i < block; ++i) {
      dst[i] = grad_bits * gm[i];
      dst[block + i] = grad_bits * gs[i];
    }
  }
  Tensor g_z = model_.hyper_synthesis().backward(hyper_s_trace_, g_raw, true);
  for (std::size_t i = 0; i < g_z.size(); ++i) g_z[i] += grad_bits * z_rate_.grad_values[i];
  auto& lg = model_.z_logits().grad;
  for (std::size_t i = 0; i < lg.size(); ++i) lg[i] += grad_bits * z_rate_.grad_logits[i];
  g_y += model_.hyper_analysis().backward(hyper_a_trace_, g_z, true);
  model_.analysis().backward(analysis_trace_, g_y, false);
}

}  // namespace psic::codec
