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
#include <vector>

#include "regionmim/model.hpp"
#include "regionmim/tensor.hpp"

namespace regionmim {

// Adam with decoupled weight decay. Moments are stored in the same order as
// the parameter list the state was created for.
struct AdamWState {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

AdamWState make_adamw_state(const std::vector<NamedParameter>& params,
                            double beta1, double beta2, double eps,
                            double weight_decay);

// t += 1; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
// theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta).
// Gradients are read from each Parameter::grad. A non-finite gradient raises
// TrainingError naming the parameter before anything is modified.
void adamw_step(std::vector<NamedParameter>& params, AdamWState& state,
                double lr);

}  // namespace regionmim
