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
#include <functional>
#include <span>
#include <vector>

#include "regionmim/tensor.hpp"

namespace regionmim {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid until the tape
// is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode recorder. Every primitive appends one node whose operands are
// earlier nodes, so the node vector is already in topological order and
// backward() is a single reverse sweep.
//
// One tape is single-threaded. Independent tapes may run concurrently as long
// as they do not bind the same Parameter.
class Tape {
 public:
  // A tape built with record = false never stores backward rules; params are
  // bound as constants. Used for evaluation and finite differences.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value);
  // Leaf requiring grad. After backward() its gradient is added to *sink when
  // sink is non-null.
  Var variable(Tensor value, Tensor* sink = nullptr);
  // Binds a Parameter: value is copied, gradient accumulates into p.grad.
  Var param(Parameter& p);

  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1, replays local rules in reverse, flushes leaf
  // gradients to their sinks and clears the tape.
  void backward(Var loss);
  void clear() { nodes_.clear(); }

  // --- used by primitive implementations ---
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
  Var record(Tensor value, std::span<const Var> operands, BackwardFn fn);
  Var record(Tensor value, std::initializer_list<Var> operands, BackwardFn fn) {
    return record(std::move(value),
                  std::span<const Var>(operands.begin(), operands.size()),
                  std::move(fn));
  }
  // Gradient slot of node id, allocated to zeros on first use.
  Tensor& grad(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Tensor* sink = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  bool record_;
  std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------
// All matrix primitives take rank-2 operands unless stated otherwise.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// x[r x c] + bias[c] broadcast over rows.
Var add_row_bias(Var x, Var bias);
Var reshape(Var a, Shape shape);

// Normalizes over the last axis with population variance.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);
// Exact x * Phi(x) using erf.
Var gelu(Var x);
Var softmax(Var x, std::size_t axis);

// Mean over the batch of -log softmax(logits)[label]; returns a {1} tensor.
Var cross_entropy(Var logits, std::span<const int> labels);
// Mean of squared elementwise differences; returns a {1} tensor.
Var mean_squared_error(Var prediction, Var target);

Var sum(Var a);
// Column means of a [r x c] matrix, shape [1 x c].
Var mean_rows(Var a);

// out[i] = a[indices[i]]; indices may repeat.
Var gather_rows(Var a, std::span<const std::size_t> indices);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);

}  // namespace regionmim
