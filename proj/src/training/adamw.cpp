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


#include "regionmim/adamw.hpp"

#include <cmath>

#include "regionmim/errors.hpp"

namespace regionmim {

AdamWState make_adamw_state(const std::vector<NamedParameter>& params,
                            double beta1, double beta2, double eps,
                            double weight_decay) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("weight decay must be non-negative");
  }
  AdamWState state;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.eps = eps;
  state.weight_decay = weight_decay;
  for (const NamedParameter& p : params) {
    state.first_moment.emplace_back(p.param->value.shape());
    state.second_moment.emplace_back(p.param->value.shape());
  }
  return state;
}

void adamw_step(std::vector<NamedParameter>& params, AdamWState& state,
                double lr) {
  if (params.size() != state.first_moment.size()) {
    throw ContractError("optimizer state tracks " +
                        std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (const NamedParameter& p : params) {
    if (!p.param->grad.all_finite()) {
      throw TrainingError("non-finite gradient in parameter " + p.name);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k].param->value;
    const Tensor& grad = params[k].param->grad;
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    if (m.shape() != value.shape()) {
      throw DimensionError("optimizer moment for " + params[k].name + " is " +
                           shape_to_string(m.shape()) + ", parameter is " +
                           shape_to_string(value.shape()));
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * (m_hat / (std::sqrt(v_hat) + state.eps) +
                        state.weight_decay * value[i]);
    }
  }
}

}  // namespace regionmim
