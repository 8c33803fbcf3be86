// Copyright 2026 The regionmim Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "regionmim/autodiff.hpp"
#include "regionmim/patching.hpp"
#include "regionmim/rng.hpp"
#include "regionmim/tensor.hpp"

namespace regionmim {

// Defaults are the ViT-Base encoder on 224 x 224 grayscale input with 16 x 16
// patches. Desk-scale runs override nearly all of them.
struct EncoderConfig {
  std::size_t depth = 12;
  std::size_t width = 768;
  std::size_t heads = 12;
  std::size_t mlp_dim = 3072;
  std::size_t patch_size = 16;
  std::size_t channels = 1;
  std::size_t max_tokens = 196;
  double ln_eps = 1e-6;

  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct DecoderConfig {
  std::size_t depth = 8;
  std::size_t width = 512;
  std::size_t heads = 16;
  std::size_t mlp_dim = 2048;

  void validate() const;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::size_t num_classes = 4;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

// Pre-LN transformer block: x + MSA(LN(x)), then x + MLP(LN(x)).
struct BlockParams {
  Parameter ln1_gain, ln1_bias;
  Parameter q_weight, q_bias, k_weight, k_bias, v_weight, v_bias;
  Parameter out_weight, out_bias;
  Parameter ln2_gain, ln2_bias;
  Parameter fc1_weight, fc1_bias, fc2_weight, fc2_bias;

  void append_to(const std::string& prefix, std::vector<NamedParameter>& out);
};

struct EncoderParams {
  EncoderConfig config;
  Parameter patch_embed;  // E, [patch_dim x width]
  Parameter pos_embed;    // E_pos, [max_tokens x width]
  std::vector<BlockParams> blocks;
  Parameter norm_gain, norm_bias;

  std::vector<NamedParameter> parameters();
};

struct DecoderParams {
  DecoderConfig config;
  std::size_t encoder_width = 0;
  std::size_t max_tokens = 0;
  std::size_t patch_dim = 0;
  Parameter embed_weight, embed_bias;  // encoder width -> decoder width
  Parameter mask_token;                // [width]
  Parameter pos_embed;                 // [max_tokens x width]
  std::vector<BlockParams> blocks;
  Parameter norm_gain, norm_bias;
  Parameter pixel_weight, pixel_bias;  // decoder width -> patch_dim

  std::vector<NamedParameter> parameters();
};

struct ClassifierHead {
  std::size_t num_classes = 0;
  Parameter weight;  // [width x K]
  Parameter bias;    // [K]

  std::vector<NamedParameter> parameters();
};

struct ModelParams {
  EncoderParams encoder;
  DecoderParams decoder;
  ClassifierHead head;

  std::vector<NamedParameter> parameters();
};

void zero_grads(std::vector<NamedParameter>& params);

// Weights ~ N(0, 0.02^2) truncated to +-2 std, biases 0, LN gains 1. Mask
// token and positional tables use the same truncated normal.
EncoderParams init_encoder(const EncoderConfig& config, Rng& rng);
DecoderParams init_decoder(const DecoderConfig& config,
                           const EncoderConfig& encoder, Rng& rng);
ClassifierHead init_classifier(std::size_t width, std::size_t num_classes,
                               Rng& rng);
ModelParams init_parameters(const ModelConfig& config, std::uint64_t seed);

// Projects the patches at `indices` with E and adds the E_pos rows gathered at
// those same original grid indices. Output [indices.size() x width].
Var embed_patches(Tape& tape, const PatchGrid& grid,
                  std::span<const std::size_t> indices, EncoderParams& enc);
Var embed_unmasked(Tape& tape, const PatchGrid& grid, const MaskingPlan& plan,
                   EncoderParams& enc);

Var transformer_block(Var x, BlockParams& block, std::size_t heads,
                      double ln_eps);

struct EncoderOutput {
  Var tokens;  // final-LN output per token, [s x width]
  Var pooled;  // mean of `tokens` over the sequence, [1 x width]
};

EncoderOutput encoder_forward(Var z0, EncoderParams& enc);

// Rebuilds the full length-n sequence (projected tokens at unmasked indices,
// the mask token at masked ones), adds decoder positions, runs the decoder
// and returns the pixel predictions for masked patches in ascending index
// order, [m x patch_dim].
Var decoder_forward(Var tokens, const MaskingPlan& plan, DecoderParams& dec,
                    double ln_eps = 1e-6);

// Original pixel values of the masked patches, [m x patch_dim].
Var masked_targets(Tape& tape, const PatchGrid& grid, const MaskingPlan& plan);

// Mean squared error over all m * T^2 * C masked-patch pixels.
Var reconstruction_loss(Var reconstructed, Var original);

// embed -> encode -> decode -> reconstruction loss for one image.
Var pretraining_loss(Tape& tape, const PatchGrid& grid, const MaskingPlan& plan,
                     EncoderParams& enc, DecoderParams& dec);

// All n patches through the encoder, GAP-pooled, then the linear head.
// Returns logits [1 x K].
Var classifier_forward(Tape& tape, const PatchGrid& grid, EncoderParams& enc,
                       ClassifierHead& head);
Var classifier_forward(Tape& tape, const ImageGrid& image, EncoderParams& enc,
                       ClassifierHead& head);

}  // namespace regionmim
