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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "regionmim/tensor.hpp"

namespace regionmim {

// Central-difference estimate (f(t+h) - f(t-h)) / 2h for every scalar of every
// parameter. Each parameter is perturbed in place and restored bit-exactly.
// The objective must be deterministic and must not call backward().
std::vector<Tensor> finite_diff_gradient(const std::function<double()>& f,
                                         std::span<Parameter* const> params,
                                         double h = 1e-5);

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are
// numerically zero from producing meaningless ratios.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t scalars_checked = 0;
};

// Compares analytic gradients (already accumulated in each Parameter::grad)
// against finite differences of f over every scalar.
GradCheckReport compare_gradients(const std::function<double()>& f,
                                  std::span<Parameter* const> params,
                                  std::span<const std::string> names,
                                  double h = 1e-5);

}  // namespace regionmim
