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

#include "regionmim/model.hpp"

#include <cmath>
#include <numeric>

#include "regionmim/errors.hpp"

namespace regionmim {

void EncoderConfig::validate() const {
  if (depth < 1) throw ContractError("encoder depth must be at least 1");
  if (width < 1 || heads < 1 || width % heads != 0) {
    throw ContractError("encoder width " + std::to_string(width) +
                        " must be a positive multiple of heads " +
                        std::to_string(heads));
  }
  if (mlp_dim < 1 || patch_size < 1 || channels < 1 || max_tokens < 1) {
    throw ContractError("encoder extents must be positive");
  }
  if (!(ln_eps > 0.0)) throw ContractError("layer norm eps must be positive");
}

void DecoderConfig::validate() const {
  if (depth < 1) throw ContractError("decoder depth must be at least 1");
  if (width < 1 || heads < 1 || width % heads != 0) {
    throw ContractError("decoder width " + std::to_string(width) +
                        " must be a positive multiple of heads " +
                        std::to_string(heads));
  }
  if (mlp_dim < 1) throw ContractError("decoder mlp_dim must be positive");
}

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (num_classes < 1) throw ContractError("num_classes must be positive");
}

void BlockParams::append_to(const std::string& prefix,
                            std::vector<NamedParameter>& out) {
  out.push_back({prefix + "ln1.gain", &ln1_gain});
  out.push_back({prefix + "ln1.bias", &ln1_bias});
  out.push_back({prefix + "attn.q.weight", &q_weight});
  out.push_back({prefix + "attn.q.bias", &q_bias});
  out.push_back({prefix + "attn.k.weight", &k_weight});
  out.push_back({prefix + "attn.k.bias", &k_bias});
  out.push_back({prefix + "attn.v.weight", &v_weight});
  out.push_back({prefix + "attn.v.bias", &v_bias});
  out.push_back({prefix + "attn.out.weight", &out_weight});
  out.push_back({prefix + "attn.out.bias", &out_bias});
  out.push_back({prefix + "ln2.gain", &ln2_gain});
  out.push_back({prefix + "ln2.bias", &ln2_bias});
  out.push_back({prefix + "mlp.fc1.weight", &fc1_weight});
  out.push_back({prefix + "mlp.fc1.bias", &fc1_bias});
  out.push_back({prefix + "mlp.fc2.weight", &fc2_weight});
  out.push_back({prefix + "mlp.fc2.bias", &fc2_bias});
}

std::vector<NamedParameter> EncoderParams::parameters() {
  std::vector<NamedParameter> out;
  out.push_back({"encoder.patch_embed", &patch_embed});
  out.push_back({"encoder.pos_embed", &pos_embed});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].append_to("encoder.blocks." + std::to_string(i) + ".", out);
  }
  out.push_back({"encoder.norm.gain", &norm_gain});
  out.push_back({"encoder.norm.bias", &norm_bias});
  return out;
}

std::vector<NamedParameter> DecoderParams::parameters() {
  std::vector<NamedParameter> out;
  out.push_back({"decoder.embed.weight", &embed_weight});
  out.push_back({"decoder.embed.bias", &embed_bias});
  out.push_back({"decoder.mask_token", &mask_token});
  out.push_back({"decoder.pos_embed", &pos_embed});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].append_to("decoder.blocks." + std::to_string(i) + ".", out);
  }
  out.push_back({"decoder.norm.gain", &norm_gain});
  out.push_back({"decoder.norm.bias", &norm_bias});
  out.push_back({"decoder.pixel.weight", &pixel_weight});
  out.push_back({"decoder.pixel.bias", &pixel_bias});
  return out;
}

std::vector<NamedParameter> ClassifierHead::parameters() {
  return {{"head.weight", &weight}, {"head.bias", &bias}};
}

std::vector<NamedParameter> ModelParams::parameters() {
  std::vector<NamedParameter> out = encoder.parameters();
  for (auto& p : decoder.parameters()) out.push_back(p);
  for (auto& p : head.parameters()) out.push_back(p);
  return out;
}

void zero_grads(std::vector<NamedParameter>& params) {
  for (auto& p : params) p.param->zero_grad();
}

namespace {

constexpr double kInitStd = 0.02;

Parameter normal_param(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.truncated_normal(kInitStd, 2.0);
  return Parameter(std::move(t));
}

Parameter constant_param(Shape shape, double value) {
  return Parameter(Tensor(std::move(shape), value));
}

BlockParams init_block(std::size_t width, std::size_t mlp_dim, Rng& rng) {
  BlockParams b;
  b.ln1_gain = constant_param({width}, 1.0);
  b.ln1_bias = constant_param({width}, 0.0);
  b.q_weight = normal_param({width, width}, rng);
  b.q_bias = constant_param({width}, 0.0);
  b.k_weight = normal_param({width, width}, rng);
  b.k_bias = constant_param({width}, 0.0);
  b.v_weight = normal_param({width, width}, rng);
  b.v_bias = constant_param({width}, 0.0);
  b.out_weight = normal_param({width, width}, rng);
  b.out_bias = constant_param({width}, 0.0);
  b.ln2_gain = constant_param({width}, 1.0);
  b.ln2_bias = constant_param({width}, 0.0);
  b.fc1_weight = normal_param({width, mlp_dim}, rng);
  b.fc1_bias = constant_param({mlp_dim}, 0.0);
  b.fc2_weight = normal_param({mlp_dim, width}, rng);
  b.fc2_bias = constant_param({width}, 0.0);
  return b;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config, Rng& rng) {
  config.validate();
  EncoderParams enc;
  enc.config = config;
  enc.patch_embed = normal_param({config.patch_dim(), config.width}, rng);
  enc.pos_embed = normal_param({config.max_tokens, config.width}, rng);
  for (std::size_t i = 0; i < config.depth; ++i) {
    enc.blocks.push_back(init_block(config.width, config.mlp_dim, rng));
  }
  enc.norm_gain = constant_param({config.width}, 1.0);
  enc.norm_bias = constant_param({config.width}, 0.0);
  return enc;
}

DecoderParams init_decoder(const DecoderConfig& config,
                           const EncoderConfig& encoder, Rng& rng) {
  config.validate();
  DecoderParams dec;
  dec.config = config;
  dec.encoder_width = encoder.width;
  dec.max_tokens = encoder.max_tokens;
  dec.patch_dim = encoder.patch_dim();
  dec.embed_weight = normal_param({encoder.width, config.width}, rng);
  dec.embed_bias = constant_param({config.width}, 0.0);
  dec.mask_token = normal_param({config.width}, rng);
  dec.pos_embed = normal_param({encoder.max_tokens, config.width}, rng);
  for (std::size_t i = 0; i < config.depth; ++i) {
    dec.blocks.push_back(init_block(config.width, config.mlp_dim, rng));
  }
  dec.norm_gain = constant_param({config.width}, 1.0);
  dec.norm_bias = constant_param({config.width}, 0.0);
  dec.pixel_weight = normal_param({config.width, dec.patch_dim}, rng);
  dec.pixel_bias = constant_param({dec.patch_dim}, 0.0);
  return dec;
}

ClassifierHead init_classifier(std::size_t width, std::size_t num_classes,
                               Rng& rng) {
  ClassifierHead head;
  head.num_classes = num_classes;
  head.weight = normal_param({width, num_classes}, rng);
  head.bias = constant_param({num_classes}, 0.0);
  return head;
}

ModelParams init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng enc_rng(derive_seed(seed, {0x656e63}));
  Rng dec_rng(derive_seed(seed, {0x646563}));
  Rng head_rng(derive_seed(seed, {0x68656164}));
  ModelParams params;
  params.encoder = init_encoder(config.encoder, enc_rng);
  params.decoder = init_decoder(config.decoder, config.encoder, dec_rng);
  params.head =
      init_classifier(config.encoder.width, config.num_classes, head_rng);
  return params;
}

Var embed_patches(Tape& tape, const PatchGrid& grid,
                  std::span<const std::size_t> indices, EncoderParams& enc) {
  const EncoderConfig& cfg = enc.config;
  if (grid.count() > cfg.max_tokens) {
    throw CapacityError("image has " + std::to_string(grid.count()) +
                        " patches but the positional table holds " +
                        std::to_string(cfg.max_tokens));
  }
  if (grid.patch_dim() != cfg.patch_dim()) {
    throw DimensionError("patch length " + std::to_string(grid.patch_dim()) +
                         " does not match encoder patch_dim " +
                         std::to_string(cfg.patch_dim()));
  }
  if (indices.empty()) throw ContractError("no patches to embed");
  const std::size_t d = grid.patch_dim();
  Tensor rows({indices.size(), d});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= grid.count()) {
      throw DimensionError("patch index " + std::to_string(indices[i]) +
                           " out of range");
    }
    std::copy_n(grid.patches.data() + indices[i] * d, d, rows.data() + i * d);
  }
  Var x = tape.constant(std::move(rows));
  Var projected = matmul(x, tape.param(enc.patch_embed));
  Var positions = gather_rows(tape.param(enc.pos_embed), indices);
  return add(projected, positions);
}

Var embed_unmasked(Tape& tape, const PatchGrid& grid, const MaskingPlan& plan,
                   EncoderParams& enc) {
  if (plan.n != grid.count()) {
    throw ContractError("masking plan built for n=" + std::to_string(plan.n) +
                        " but image has " + std::to_string(grid.count()) +
                        " patches");
  }
  return embed_patches(tape, grid, plan.unmasked, enc);
}

namespace {

Var linear(Var x, Parameter& weight, Parameter& bias) {
  Tape& tape = x.tape();
  return add_row_bias(matmul(x, tape.param(weight)), tape.param(bias));
}

Var multi_head_attention(Var x, BlockParams& b, std::size_t heads) {
  const std::size_t width = x.value().cols();
  const std::size_t head_dim = width / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var q = linear(x, b.q_weight, b.q_bias);
  Var k = linear(x, b.k_weight, b.k_bias);
  Var v = linear(x, b.v_weight, b.v_bias);
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * head_dim, head_dim);
    Var kh = slice_cols(k, h * head_dim, head_dim);
    Var vh = slice_cols(v, h * head_dim, head_dim);
    Var scores = scale(matmul(qh, transpose(kh)), scale_factor);
    outputs.push_back(matmul(softmax(scores, 1), vh));
  }
  Var merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  return linear(merged, b.out_weight, b.out_bias);
}

}  // namespace

Var transformer_block(Var x, BlockParams& b, std::size_t heads,
                      double ln_eps) {
  Tape& tape = x.tape();
  if (x.value().rank() != 2 || x.value().cols() != b.ln1_gain.value.size()) {
    throw DimensionError("block input " + shape_to_string(x.shape()) +
                         " does not match width " +
                         std::to_string(b.ln1_gain.value.size()));
  }
  Var h = layer_norm(x, tape.param(b.ln1_gain), tape.param(b.ln1_bias), ln_eps);
  x = add(x, multi_head_attention(h, b, heads));
  h = layer_norm(x, tape.param(b.ln2_gain), tape.param(b.ln2_bias), ln_eps);
  Var mlp = linear(gelu(linear(h, b.fc1_weight, b.fc1_bias)), b.fc2_weight,
                   b.fc2_bias);
  return add(x, mlp);
}

EncoderOutput encoder_forward(Var z0, EncoderParams& enc) {
  const EncoderConfig& cfg = enc.config;
  if (z0.value().rank() != 2 || z0.value().cols() != cfg.width) {
    throw DimensionError("encoder input " + shape_to_string(z0.shape()) +
                         " does not match width " + std::to_string(cfg.width));
  }
  Tape& tape = z0.tape();
  Var z = z0;
  for (BlockParams& block : enc.blocks) {
    z = transformer_block(z, block, cfg.heads, cfg.ln_eps);
  }
  Var tokens = layer_norm(z, tape.param(enc.norm_gain),
                          tape.param(enc.norm_bias), cfg.ln_eps);
  return {tokens, mean_rows(tokens)};
}

Var decoder_forward(Var tokens, const MaskingPlan& plan, DecoderParams& dec,
                    double ln_eps) {
  Tape& tape = tokens.tape();
  if (tokens.value().rank() != 2 || tokens.value().rows() != plan.u()) {
    throw ContractError("decoder received " + shape_to_string(tokens.shape()) +
                        " tokens for a plan with u=" + std::to_string(plan.u()));
  }
  if (tokens.value().cols() != dec.encoder_width) {
    throw DimensionError("decoder expects encoder width " +
                         std::to_string(dec.encoder_width) + ", got " +
                         shape_to_string(tokens.shape()));
  }
  if (plan.n > dec.max_tokens) {
    throw CapacityError("plan covers " + std::to_string(plan.n) +
                        " patches but the decoder table holds " +
                        std::to_string(dec.max_tokens));
  }
  if (plan.m() == 0) throw ContractError("plan masks no patches");
  const std::size_t width = dec.config.width;
  Var projected = linear(tokens, dec.embed_weight, dec.embed_bias);
  Var mask_row = reshape(tape.param(dec.mask_token), {1, width});
  const Var parts[] = {projected, mask_row};
  Var stacked = concat_rows(parts);

  // Row u of `stacked` is the mask token.
  std::vector<std::size_t> layout(plan.n, plan.u());
  for (std::size_t j = 0; j < plan.unmasked.size(); ++j) {
    layout[plan.unmasked[j]] = j;
  }
  std::vector<std::size_t> order(plan.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Var x = add(gather_rows(stacked, layout),
              gather_rows(tape.param(dec.pos_embed), order));
  for (BlockParams& block : dec.blocks) {
    x = transformer_block(x, block, dec.config.heads, ln_eps);
  }
  x = layer_norm(x, tape.param(dec.norm_gain), tape.param(dec.norm_bias),
                 ln_eps);
  Var pixels = linear(x, dec.pixel_weight, dec.pixel_bias);
  return gather_rows(pixels, plan.masked);
}

Var masked_targets(Tape& tape, const PatchGrid& grid, const MaskingPlan& plan) {
  const std::size_t d = grid.patch_dim();
  Tensor rows({plan.m(), d});
  for (std::size_t i = 0; i < plan.m(); ++i) {
    std::copy_n(grid.patches.data() + plan.masked[i] * d, d,
                rows.data() + i * d);
  }
  return tape.constant(std::move(rows));
}

Var reconstruction_loss(Var reconstructed, Var original) {
  if (reconstructed.value().rank() != 2 || reconstructed.value().rows() == 0) {
    throw DimensionError("reconstruction needs a non-empty [m x P] matrix");
  }
  return mean_squared_error(reconstructed, original);
}

Var pretraining_loss(Tape& tape, const PatchGrid& grid, const MaskingPlan& plan,
                     EncoderParams& enc, DecoderParams& dec) {
  Var z0 = embed_unmasked(tape, grid, plan, enc);
  EncoderOutput encoded = encoder_forward(z0, enc);
  Var reconstructed =
      decoder_forward(encoded.tokens, plan, dec, enc.config.ln_eps);
  return reconstruction_loss(reconstructed, masked_targets(tape, grid, plan));
}

Var classifier_forward(Tape& tape, const PatchGrid& grid, EncoderParams& enc,
                       ClassifierHead& head) {
  if (head.weight.value.rows() != enc.config.width) {
    throw DimensionError("classifier head expects width " +
                         std::to_string(head.weight.value.rows()) +
                         ", encoder has " + std::to_string(enc.config.width));
  }
  std::vector<std::size_t> all(grid.count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  EncoderOutput encoded = encoder_forward(embed_patches(tape, grid, all, enc), enc);
  return linear(encoded.pooled, head.weight, head.bias);
}

Var classifier_forward(Tape& tape, const ImageGrid& image, EncoderParams& enc,
                       ClassifierHead& head) {
  return classifier_forward(
      tape, split_into_patches(image, enc.config.patch_size), enc, head);
}

}  // namespace regionmim
