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

// Mean-scale hyperprior image codec whose synthesis transform accepts a
// conditional trigger stack.
//
//   x (N,3,H,W) -> analysis -> y (N,Cy,H/16,W/16)
//   y -> hyper analysis -> z (N,Cz,H/64,W/64) -> round -> z_hat
//   z_hat -> hyper synthesis -> (means, scales) for y
//   round(y) + triggers(mode) -> synthesis -> x_hat, clamped to [0,1]

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "psic/cltg.hpp"
#include "psic/nn.hpp"
#include "psic/tensor.hpp"

namespace psic::codec {

inline constexpr int kDownsample = 16;
inline constexpr int kHyperDownsample = 64;
inline constexpr Real kLikelihoodFloor = 1e-9;
inline constexpr Real kScaleFloor = 1e-9;
/// Distortion is measured on the 8-bit scale: 255^2 * MSE.
inline constexpr Real kDistortionScale = 255.0 * 255.0;

struct CodecConfig {
  int channels = 32;
  int latent_channels = 64;
  int hyper_channels = 32;
  int embed_dim = 64;
  /// z symbols live in [-z_half_support, z_half_support].
  int z_half_support = 32;
  std::vector<Real> lambdas = {0.0018, 0.0035, 0.0067, 0.013};
  int lambda_index = 0;

  Real lambda() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

/// Throws DimensionError unless x is (N,3,H,W) with H, W multiples of 64, and
/// DomainError if any entry lies outside [0,1].
void validate_image(const Tensor& x);

enum class QuantizeMode { kTrainNoise, kInferRound };

/// kInferRound: nearest integer (ties away from zero). kTrainNoise: adds
/// i.i.d. U(-0.5, 0.5); requires `rng`.
Tensor quantize(const Tensor& v, QuantizeMode mode, std::mt19937_64* rng = nullptr);

/// Per-channel cumulative table over integer z symbols
/// [min_symbol, min_symbol + symbols).
struct ZCdfTable {
  int min_symbol = 0;
  int symbols = 0;
  /// cdf[c] has symbols + 1 entries, cdf[c][0] == 0, cdf[c][symbols] == 1.
  std::vector<std::vector<Real>> cdf;

  static ZCdfTable uniform(int channels, int min_symbol, int symbols);
  int channels() const { return static_cast<int>(cdf.size()); }
  /// Probability mass of integer `value` in channel c; 0 outside support.
  Real probability(int c, Real value) const;
};

struct EntropyParams {
  Tensor means;
  Tensor scales;
  ZCdfTable z_cdf;
};

struct LatentCode {
  Tensor y_hat;
  Tensor z_hat;
};

/// Synthesis transform: four upsampling blocks, each preceded by trigger
/// fusion at its input.
class SynthesisTransform {
 public:
  struct Trace {
    std::vector<Tensor> fused;  // input to block k's transposed conv
    std::vector<Tensor> pre;    // pre-activation output of block k
  };

  SynthesisTransform(int latent_channels, int channels, std::mt19937_64& rng);

  std::vector<int> block_depths() const { return depths_; }
  std::size_t block_count() const { return depths_.size(); }

  /// Output before the [0,1] clamp.
  Tensor forward(const Tensor& y_hat, const cltg::TriggerStack& triggers,
                 const cltg::TriggerGenerator& generator, Trace* trace = nullptr) const;
  /// grad_out is dL/d(unclamped output). Accumulates transform and channel
  /// weight gradients; fills dL/dtrigger per block; returns dL/dy_hat when
  /// `input_grad` is set.
  Tensor backward(const Trace& trace, const Tensor& grad_out,
                  const cltg::TriggerStack& triggers, cltg::TriggerGenerator& generator,
                  std::vector<std::vector<Real>>& grad_triggers, bool input_grad);
  nn::ParamList params();

 private:
  std::vector<int> depths_;
  std::vector<nn::ConvTranspose2d> layers_;
};

/// Holds the three parameter collections: encoder (analysis), entropy model
/// (hyper analysis, hyper synthesis, z density logits) and decoder
/// (synthesis plus trigger generator).
class CodecModel {
 public:
  CodecModel(const CodecConfig& config, std::uint64_t seed);
  CodecModel(const CodecModel&) = delete;
  CodecModel& operator=(const CodecModel&) = delete;

  const CodecConfig& config() const { return config_; }
  CodecConfig& mutable_config() { return config_; }

  const nn::Chain& analysis() const { return analysis_; }
  nn::Chain& analysis() { return analysis_; }
  const nn::Chain& hyper_analysis() const { return hyper_analysis_; }
  nn::Chain& hyper_analysis() { return hyper_analysis_; }
  const nn::Chain& hyper_synthesis() const { return hyper_synthesis_; }
  nn::Chain& hyper_synthesis() { return hyper_synthesis_; }
  const nn::Param& z_logits() const { return z_logits_; }
  nn::Param& z_logits() { return z_logits_; }
  const SynthesisTransform& synthesis() const { return synthesis_; }
  SynthesisTransform& synthesis() { return synthesis_; }
  const cltg::TriggerGenerator& triggers() const { return triggers_; }
  cltg::TriggerGenerator& triggers() { return triggers_; }

  nn::ParamList encoder_params();
  nn::ParamList entropy_params();
  nn::ParamList decoder_params();
  nn::ParamList all_params();

  /// Current z density as a cumulative table.
  ZCdfTable z_cdf_table() const;
  int z_min_symbol() const { return -config_.z_half_support; }
  int z_symbols() const { return 2 * config_.z_half_support + 1; }

 private:
  CodecModel(const CodecConfig& config, std::mt19937_64&& rng);

  CodecConfig config_;
  nn::Chain analysis_;
  nn::Chain hyper_analysis_;
  nn::Chain hyper_synthesis_;
  nn::Param z_logits_;  // (1, Cz, 1, symbols)
  SynthesisTransform synthesis_;
  cltg::TriggerGenerator triggers_;
};

Tensor analysis_transform(const Tensor& x, const CodecModel& model);

struct HyperOutput {
  Tensor z;
  Tensor z_hat;
  EntropyParams params;
};

/// Inference hyper path: z = h_a(y), z_hat = clamp(round(z)) to the table
/// support, entropy parameters decoded from z_hat.
HyperOutput hyper_path(const Tensor& y, const CodecModel& model);

/// Decoder-side entropy parameters from a decoded z_hat.
EntropyParams entropy_params_from_z(const Tensor& z_hat, const CodecModel& model);

/// Bits needed for (y_hat, z_hat) under the discretized Gaussian for y and the
/// cumulative table for z. Likelihoods are clamped to [1e-9, 1].
Real rate_estimate(const LatentCode& latents, const EntropyParams& ep);

/// Decodes y_hat with one trigger per decoder block; output clamped to [0,1].
Tensor synthesis_transform(const Tensor& y_hat, const cltg::TriggerStack& triggers,
                           const CodecModel& model);

/// Convenience: encoder-side latents (y_hat, z_hat) and entropy parameters.
struct EncodedLatents {
  LatentCode latents;
  EntropyParams params;
};
EncodedLatents encode_latents(const Tensor& x, const CodecModel& model);

/// Full-pipeline reconstruction of x under `mode` (no bitstream round trip).
Tensor reconstruct(const Tensor& x, cltg::Mode mode, const CodecModel& model);

Real gaussian_cdf(Real x);

/// P(v - 0.5 < Y < v + 0.5) for Y ~ N(mean, scale^2), clamped to [1e-9, 1].
Real discretized_gaussian_likelihood(Real v, Real mean, Real scale);

struct RateWithGrad {
  Real bits = 0;
  Tensor grad_values;
  Tensor grad_means;
  Tensor grad_scales;
};

/// Sum of -log2 likelihoods of `values` under the discretized Gaussian, with
/// gradients when `with_grad` is set.
RateWithGrad gaussian_bits(const Tensor& values, const Tensor& means, const Tensor& scales,
                           bool with_grad);

struct TableRateWithGrad {
  Real bits = 0;
  Tensor grad_values;
  Tensor grad_logits;
};

/// Bits of (possibly non-integer) z values under the softmax-of-logits
/// density, linearly interpolated between integer symbols.
TableRateWithGrad z_table_bits(const Tensor& values, const nn::Param& logits, int min_symbol,
                               bool with_grad);

/// Differentiable pass through the codec for one batch and one mode.
///
/// With `train_encoder` the rate terms see additive uniform noise and both the
/// decoder and the hyper synthesis see straight-through rounded latents. With
/// it unset only the decoder is differentiated; the latents are rounded.
class TrainingPass {
 public:
  TrainingPass(CodecModel& model, const Tensor& x, cltg::Mode mode, bool train_encoder,
               std::mt19937_64& rng);

  const Tensor& reconstruction() const { return x_hat_; }
  const Tensor& y_hat() const { return y_hat_; }
  /// y + z bits under the relaxed rate model (0 without train_encoder).
  Real rate_bits() const { return y_rate_.bits + z_rate_.bits; }
  Real bits_per_pixel() const;

  /// dL/dx_hat (clamped reconstruction) and dL/dbits. Accumulates gradients
  /// into the model parameters.
  void backward(const Tensor& grad_recon, Real grad_bits);

 private:
  CodecModel& model_;
  cltg::Mode mode_;
  bool train_encoder_;
  Shape image_shape_;

  nn::Chain::Trace analysis_trace_;
  nn::Chain::Trace hyper_a_trace_;
  nn::Chain::Trace hyper_s_trace_;
  SynthesisTransform::Trace synthesis_trace_;
  cltg::TriggerGenerator::Trace trigger_trace_;
  cltg::TriggerStack triggers_;

  Tensor y_;
  Tensor y_hat_;
  Tensor scale_raw_;
  Tensor out_pre_clamp_;
  Tensor x_hat_;
  RateWithGrad y_rate_;
  TableRateWithGrad z_rate_;
};

/// Clamp to [0,1]; its backward passes gradient inside the interval and, at
/// the boundary, only when a descent step would move back inside.
Tensor clamp_unit(const Tensor& v);
Tensor clamp_unit_backward(const Tensor& pre, const Tensor& grad_out);

Real mse(const Tensor& a, const Tensor& b);

}  // namespace psic::codec
