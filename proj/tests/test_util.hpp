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

// Helpers shared by the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "regionmim/autodiff.hpp"
#include "regionmim/gradcheck.hpp"
#include "regionmim/rng.hpp"
#include "regionmim/tensor.hpp"

namespace regionmim::testing {

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("regionmim_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Builds sum(op(inputs) * weights) for fixed random weights so the upstream
// gradient of `op` is not uniform, then compares backward() against central
// differences. Returns the worst relative error.
inline double op_gradient_error(
    const std::function<Var(Tape&, std::vector<Var>&)>& op,
    std::vector<Parameter>& inputs, std::uint64_t seed = 1) {
  Tensor weights;
  auto loss_on = [&](Tape& tape) {
    std::vector<Var> vars;
    for (Parameter& p : inputs) vars.push_back(tape.param(p));
    Var out = op(tape, vars);
    if (weights.empty()) {
      Rng rng(seed);
      weights = random_tensor(out.shape(), rng, -1.0, 1.0);
    }
    return sum(mul(out, tape.constant(weights)));
  };
  for (Parameter& p : inputs) p.zero_grad();
  {
    Tape tape;
    tape.backward(loss_on(tape));
  }
  std::vector<Parameter*> ptrs;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ptrs.push_back(&inputs[i]);
    names.push_back("input" + std::to_string(i));
  }
  auto f = [&] {
    Tape tape(false);
    return loss_on(tape).value()[0];
  };
  return compare_gradients(f, ptrs, names).max_relative_error;
}

}  // namespace regionmim::testing
