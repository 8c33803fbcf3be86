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

#include <cmath>
#include <cstring>
#include <numbers>

#include "doctest.h"
#include "regionmim/autodiff.hpp"
#include "regionmim/errors.hpp"
#include "regionmim/gradcheck.hpp"
#include "../test_util.hpp"

namespace regionmim {
namespace {

using testing::op_gradient_error;
using testing::random_tensor;

std::vector<Parameter> random_params(std::initializer_list<Shape> shapes,
                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Parameter> out;
  for (const Shape& s : shapes) out.emplace_back(random_tensor(s, rng));
  return out;
}

TEST_CASE("matmul") {
  Tape tape;
  SUBCASE("identity leaves the right operand unchanged") {
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    const Tensor b = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
    CHECK(matmul(tape.constant(eye), tape.constant(b)).value() == b);
  }
  SUBCASE("hand arithmetic") {
    Var out = matmul(tape.constant(Tensor::matrix({{1, 2}, {3, 4}})),
                     tape.constant(Tensor::matrix({{1}, {1}})));
    CHECK(out.value() == Tensor::matrix({{3}, {7}}));
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3})));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
    }
  }
  SUBCASE("gradients match central differences") {
    auto inputs = random_params({{4, 5}, {5, 3}}, 11);
    const double err = op_gradient_error(
        [](Tape&, std::vector<Var>& v) { return matmul(v[0], v[1]); }, inputs);
    CHECK(err < 1e-6);
  }
  SUBCASE("constant operands record no backward rule") {
    Var out = matmul(tape.constant(Tensor({2, 2}, 1.0)),
                     tape.constant(Tensor({2, 2}, 1.0)));
    CHECK_FALSE(out.requires_grad());
  }
}

TEST_CASE("layer_norm") {
  Tape tape;
  Var gain = tape.constant(Tensor({2}, 1.0));
  Var bias = tape.constant(Tensor({2}, 0.0));
  SUBCASE("constant row centers to zero") {
    Var g5 = tape.constant(Tensor({5}, 1.0));
    Var b5 = tape.constant(Tensor({5}, 0.0));
    Var out = layer_norm(tape.constant(Tensor({1, 5}, 5.0)), g5, b5);
    for (double v : out.value().values()) CHECK(v == 0.0);
  }
  SUBCASE("unit variance row is preserved as eps goes to zero") {
    Var out = layer_norm(tape.constant(Tensor::matrix({{1, -1}})), gain, bias,
                         1e-14);
    CHECK(out.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.value()[1] == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(layer_norm(tape.constant(Tensor({2, 3})), gain, bias),
                    DimensionError);
  }
  SUBCASE("standardizes every row") {
    Rng rng(5);
    const std::size_t d = 7;
    Var g = tape.constant(Tensor({d}, 1.0));
    Var b = tape.constant(Tensor({d}, 0.0));
    for (int trial = 0; trial < 50; ++trial) {
      Var out = layer_norm(tape.constant(random_tensor({3, d}, rng)), g, b,
                           1e-15);
      for (std::size_t r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += out.value().at(r, j);
        mean /= d;
        for (std::size_t j = 0; j < d; ++j) {
          var += std::pow(out.value().at(r, j) - mean, 2);
        }
        var /= d;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);
      }
    }
  }
  SUBCASE("gradients match central differences") {
    auto inputs = random_params({{3, 6}, {6}, {6}}, 12);
    const double err = op_gradient_error(
        [](Tape&, std::vector<Var>& v) {
          return layer_norm(v[0], v[1], v[2], 1e-6);
        },
        inputs);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("gelu") {
  Tape tape;
  Var out = gelu(tape.constant(Tensor::vector({0.0, 10.0})));
  CHECK(out.value()[0] == 0.0);
  CHECK(std::abs(out.value()[1] - 10.0) < 1e-6);

  std::vector<Parameter> inputs;
  inputs.emplace_back(Tensor::vector({-2.0, -0.5, 0.5, 2.0}));
  const double err = op_gradient_error(
      [](Tape&, std::vector<Var>& v) { return gelu(v[0]); }, inputs);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax") {
  Tape tape;
  SUBCASE("uniform logits") {
    Var out = softmax(tape.constant(Tensor({1, 4}, 3.0)), 1);
    for (double v : out.value().values()) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("large logits do not overflow") {
    Var out = softmax(tape.constant(Tensor::matrix({{1000, 0}})), 1);
    CHECK(out.value()[0] == 1.0);
    CHECK(out.value()[1] == doctest::Approx(0.0));
    CHECK(out.value().all_finite());
  }
  SUBCASE("rows are distributions along any axis") {
    Rng rng(9);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      Tensor x = random_tensor({3, 4, 5}, rng, -20, 20);
      Var out = softmax(tape.constant(x), axis);
      const Shape& s = x.shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
      for (std::size_t i = axis + 1; i < 3; ++i) inner *= s[i];
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          double total = 0.0;
          for (std::size_t k = 0; k < s[axis]; ++k) {
            const double p = out.value()[(o * s[axis] + k) * inner + in];
            CHECK(p >= 0.0);
            total += p;
          }
          CHECK(std::abs(total - 1.0) < 1e-12);
        }
      }
    }
  }
  SUBCASE("axis out of range") {
    CHECK_THROWS_AS(softmax(tape.constant(Tensor({2, 2})), 2), DimensionError);
  }
  SUBCASE("Jacobian-vector products match central differences") {
    for (std::size_t axis : {0, 1}) {
      auto inputs = random_params({{3, 5}}, 20 + axis);
      const double err = op_gradient_error(
          [axis](Tape&, std::vector<Var>& v) { return softmax(v[0], axis); },
          inputs);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("cross_entropy") {
  Tape tape;
  const std::vector<int> one = {2};
  SUBCASE("uniform logits give ln K") {
    Var loss = cross_entropy(tape.constant(Tensor({1, 4}, 0.3)), one);
    CHECK(loss.value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(std::abs(loss.value()[0] - 1.386294) < 1e-6);
  }
  SUBCASE("saturated correct logit gives zero") {
    Var loss =
        cross_entropy(tape.constant(Tensor::matrix({{0, 0, 1000, 0}})), one);
    CHECK(std::abs(loss.value()[0]) < 1e-9);
  }
  SUBCASE("label out of range names the index") {
    const std::vector<int> labels = {0, 4};
    try {
      cross_entropy(tape.constant(Tensor({2, 4})), labels);
      FAIL("expected LabelError");
    } catch (const LabelError& e) {
      CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }
  }
  SUBCASE("gradients match central differences") {
    auto inputs = random_params({{3, 4}}, 31);
    const std::vector<int> labels = {0, 3, 1};
    const double err = op_gradient_error(
        [&](Tape&, std::vector<Var>& v) { return cross_entropy(v[0], labels); },
        inputs);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("remaining primitives match central differences") {
  using Op = std::function<Var(Tape&, std::vector<Var>&)>;
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    Op op;
  };
  const std::vector<std::size_t> rows = {2, 0, 2, 1};
  const std::vector<Case> cases = {
      {"transpose", {{3, 4}}, [](Tape&, auto& v) { return transpose(v[0]); }},
      {"add", {{2, 3}, {2, 3}}, [](Tape&, auto& v) { return add(v[0], v[1]); }},
      {"sub", {{2, 3}, {2, 3}}, [](Tape&, auto& v) { return sub(v[0], v[1]); }},
      {"mul", {{2, 3}, {2, 3}}, [](Tape&, auto& v) { return mul(v[0], v[1]); }},
      {"scale", {{2, 3}}, [](Tape&, auto& v) { return scale(v[0], -1.7); }},
      {"add_row_bias", {{3, 4}, {4}},
       [](Tape&, auto& v) { return add_row_bias(v[0], v[1]); }},
      {"reshape", {{2, 6}}, [](Tape&, auto& v) { return reshape(v[0], {3, 4}); }},
      {"mean_rows", {{5, 3}}, [](Tape&, auto& v) { return mean_rows(v[0]); }},
      {"gather_rows", {{3, 2}},
       [&](Tape&, auto& v) { return gather_rows(v[0], rows); }},
      {"concat_rows", {{2, 3}, {1, 3}},
       [](Tape&, auto& v) { return concat_rows(v); }},
      {"concat_cols", {{2, 3}, {2, 1}},
       [](Tape&, auto& v) { return concat_cols(v); }},
      {"slice_cols", {{3, 5}},
       [](Tape&, auto& v) { return slice_cols(v[0], 1, 3); }},
      {"mean_squared_error", {{3, 4}, {3, 4}},
       [](Tape&, auto& v) { return mean_squared_error(v[0], v[1]); }},
      {"sum", {{2, 2}}, [](Tape&, auto& v) { return sum(v[0]); }},
  };
  std::uint64_t seed = 100;
  for (const Case& c : cases) {
    CAPTURE(c.name);
    Rng rng(seed++);
    std::vector<Parameter> inputs;
    for (const Shape& s : c.shapes) inputs.emplace_back(random_tensor(s, rng));
    CHECK(op_gradient_error(c.op, inputs, seed) < 1e-5);
  }
}

TEST_CASE("backward") {
  SUBCASE("sum gives all-ones") {
    Parameter x(Tensor({2, 3}, 0.7));
    Tape tape;
    tape.backward(sum(tape.param(x)));
    CHECK(x.grad == Tensor({2, 3}, 1.0));
  }
  SUBCASE("sum of squares gives 2x") {
    Rng rng(3);
    Parameter x(random_tensor({4}, rng));
    Tape tape;
    Var v = tape.param(x);
    tape.backward(sum(mul(v, v)));
    for (std::size_t k = 0; k < 4; ++k) CHECK(x.grad[k] == 2.0 * x.value[k]);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Parameter x(Tensor({2}, 1.0));
    Tape tape;
    CHECK_THROWS_AS(tape.backward(tape.param(x)), ContractError);
  }
  SUBCASE("tape is cleared afterwards") {
    Parameter x(Tensor({2}, 1.0));
    Tape tape;
    tape.backward(sum(tape.param(x)));
    CHECK(tape.size() == 0);
  }
  SUBCASE("gradient of a sum is the sum of gradients") {
    Rng rng(4);
    Parameter x(random_tensor({3, 3}, rng));
    auto loss_a = [](Var v) { return sum(gelu(v)); };
    auto loss_b = [](Var v) { return sum(mul(v, v)); };
    Tensor ga, gb;
    {
      Tape tape;
      tape.backward(loss_a(tape.param(x)));
      ga = x.grad;
      x.zero_grad();
      tape.backward(loss_b(tape.param(x)));
      gb = x.grad;
      x.zero_grad();
    }
    Tape tape;
    Var v = tape.param(x);
    tape.backward(add(loss_a(v), loss_b(v)));
    for (std::size_t k = 0; k < 9; ++k) {
      CHECK(std::abs(x.grad[k] - (ga[k] + gb[k])) < 1e-12);
    }
  }
  SUBCASE("shared subexpressions accumulate") {
    Parameter x(Tensor::vector({1.5}));
    Tape tape;
    Var v = tape.param(x);
    Var y = add(v, v);
    tape.backward(sum(add(y, y)));
    CHECK(x.grad[0] == 4.0);
  }
}

TEST_CASE("replaying an op is bitwise deterministic") {
  Rng rng(8);
  const Tensor a = random_tensor({4, 6}, rng);
  const Tensor g = random_tensor({6}, rng);
  auto run = [&] {
    Tape tape;
    Var x = tape.constant(a);
    Var out = softmax(layer_norm(x, tape.constant(g), tape.constant(g)), 1);
    return gelu(matmul(out, transpose(x))).value();
  };
  const Tensor first = run();
  const Tensor second = run();
  CHECK(std::memcmp(first.data(), second.data(), first.size() * sizeof(double)) ==
        0);
}

TEST_CASE("finite_diff_gradient") {
  Parameter theta(Tensor::vector({3.0}));
  std::vector<Parameter*> params = {&theta};
  SUBCASE("quadratic") {
    auto grads = finite_diff_gradient(
        [&] { return theta.value[0] * theta.value[0]; }, params, 1e-5);
    CHECK(std::abs(grads[0][0] - 6.0) < 1e-8);
    CHECK(theta.value[0] == 3.0);
  }
  SUBCASE("constant") {
    auto grads = finite_diff_gradient([] { return 4.2; }, params);
    CHECK(std::abs(grads[0][0]) < 1e-9);
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({0, 2}), DimensionError);
  const Tensor t({2, 3}, 1.0);
  CHECK(t.size() == shape_product(t.shape()));
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

}  // namespace
}  // namespace regionmim
