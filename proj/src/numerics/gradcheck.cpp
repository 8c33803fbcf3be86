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

#include "regionmim/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "regionmim/errors.hpp"

namespace regionmim {

std::vector<Tensor> finite_diff_gradient(const std::function<double()>& f,
                                         std::span<Parameter* const> params,
                                         double h) {
  std::vector<Tensor> result;
  result.reserve(params.size());
  for (Parameter* p : params) {
    Tensor estimate(p->value.shape());
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double original = p->value[k];
      p->value[k] = original + h;
      const double plus = f();
      p->value[k] = original - h;
      const double minus = f();
      p->value[k] = original;
      estimate[k] = (plus - minus) / (2.0 * h);
    }
    result.push_back(std::move(estimate));
  }
  return result;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport compare_gradients(const std::function<double()>& f,
                                  std::span<Parameter* const> params,
                                  std::span<const std::string> names,
                                  double h) {
  if (names.size() != params.size()) {
    throw ContractError("compare_gradients: one name per parameter required");
  }
  const std::vector<Tensor> numeric = finite_diff_gradient(f, params, h);
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& analytic = params[i]->grad;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      const double err = relative_error(analytic[k], numeric[i][k]);
      ++report.scalars_checked;
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = err;
        report.worst_parameter = names[i];
        report.worst_index = k;
        report.worst_analytic = analytic[k];
        report.worst_numeric = numeric[i][k];
      }
    }
  }
  return report;
}

}  // namespace regionmim
