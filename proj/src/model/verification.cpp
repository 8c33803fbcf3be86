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

#include "regionmim/verification.hpp"

#include <string>
#include <vector>

#include "regionmim/rng.hpp"

namespace regionmim {

ModelConfig tiny_model_config() {
  ModelConfig config;
  config.encoder.depth = 2;
  config.encoder.width = 8;
  config.encoder.heads = 2;
  config.encoder.mlp_dim = 32;
  config.encoder.patch_size = 4;
  config.encoder.channels = 1;
  config.encoder.max_tokens = 16;
  config.decoder.depth = 1;
  config.decoder.width = 8;
  config.decoder.heads = 2;
  config.decoder.mlp_dim = 32;
  config.num_classes = 4;
  return config;
}

namespace {

void randomize(std::vector<NamedParameter>& params, Rng& rng) {
  for (auto& np : params) {
    const bool is_gain = np.name.ends_with(".gain");
    for (double& v : np.param->value.values()) {
      v = (is_gain ? 1.0 : 0.0) + rng.uniform(-0.5, 0.5);
    }
    np.param->zero_grad();
  }
}

GradCheckReport check(std::vector<NamedParameter>& params,
                      const std::function<Var(Tape&)>& loss, double h) {
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Parameter*> ptrs;
  std::vector<std::string> names;
  for (auto& np : params) {
    ptrs.push_back(np.param);
    names.push_back(np.name);
  }
  auto f = [&] {
    Tape tape(false);
    return loss(tape).value()[0];
  };
  return compare_gradients(f, ptrs, names, h);
}

}  // namespace

ModelGradCheck check_model_gradients(std::uint64_t seed, double h,
                                     double sigma) {
  const ModelConfig config = tiny_model_config();
  ModelParams model = init_parameters(config, seed);
  Rng rng(derive_seed(seed, {0x6772616463686b}));

  const std::size_t side = 16;
  ImageGrid image(side, side, 1);
  for (double& v : image.pixels) v = rng.uniform();
  MaskImage mask(side, side);
  // A centered blob guarantees a non-empty valid set.
  for (std::size_t y = 3; y < 13; ++y)
    for (std::size_t x = 2; x < 11; ++x) mask.at(y, x) = 1;
  const PatchGrid grid = split_into_patches(image, config.encoder.patch_size);
  const MaskingPlan plan = build_masking_plan(
      grid.count(), compute_valid_set(image, mask, config.encoder.patch_size),
      sigma, MaskStrategy::kRegionGuided, derive_seed(seed, {1}));

  ModelGradCheck result;

  std::vector<NamedParameter> pre = model.encoder.parameters();
  for (auto& p : model.decoder.parameters()) pre.push_back(p);
  randomize(pre, rng);
  result.pretraining = check(
      pre,
      [&](Tape& tape) {
        return pretraining_loss(tape, grid, plan, model.encoder, model.decoder);
      },
      h);

  std::vector<NamedParameter> fine = model.encoder.parameters();
  for (auto& p : model.head.parameters()) fine.push_back(p);
  randomize(fine, rng);
  // A two-image batch so the mean reduction is exercised.
  ImageGrid second(side, side, 1);
  for (double& v : second.pixels) v = rng.uniform();
  const PatchGrid grid2 = split_into_patches(second, config.encoder.patch_size);
  const std::vector<int> labels = {1, 3};
  result.finetuning = check(
      fine,
      [&](Tape& tape) {
        const Var logits[] = {
            classifier_forward(tape, grid, model.encoder, model.head),
            classifier_forward(tape, grid2, model.encoder, model.head)};
        return cross_entropy(concat_rows(logits), labels);
      },
      h);
  return result;
}

}  // namespace regionmim
