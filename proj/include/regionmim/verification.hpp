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

#include <cstdint>

#include "regionmim/gradcheck.hpp"
#include "regionmim/model.hpp"

namespace regionmim {

// 16x16 grayscale, T=4 (16 patches), width 8, 2 heads, 2 encoder blocks,
// one decoder block of width 8, four classes.
ModelConfig tiny_model_config();

struct ModelGradCheck {
  GradCheckReport pretraining;  // reconstruction loss -> encoder + decoder
  GradCheckReport finetuning;   // cross-entropy -> encoder + head

  double max_relative_error() const {
    return pretraining.max_relative_error > finetuning.max_relative_error
               ? pretraining.max_relative_error
               : finetuning.max_relative_error;
  }
};

// Builds the tiny model with parameters drawn from U(-0.5, 0.5) (LN gains
// around 1) so every gradient is well away from zero, then compares the
// backward pass against central differences over every parameter scalar for
// both training objectives. sigma is the masking ratio of the pretraining
// plan.
ModelGradCheck check_model_gradients(std::uint64_t seed, double h = 1e-5,
                                     double sigma = 0.75);

}  // namespace regionmim
