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

#include "regionmim/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "regionmim/errors.hpp"

namespace regionmim {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::variable(Tensor value, Tensor* sink) {
  if (!record_) return constant(std::move(value));
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.sink = sink;
  return push(std::move(node));
}

Var Tape::param(Parameter& p) { return variable(p.value, &p.grad); }

Var Tape::record(Tensor value, std::span<const Var> operands,
                 BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  if (record_) {
    for (const Var& v : operands) {
      if (&v.tape() != this) {
        throw ContractError("operands recorded on different tapes");
      }
      node.requires_grad = node.requires_grad || v.requires_grad();
    }
    if (node.requires_grad) node.backward = std::move(fn);
  }
  return push(std::move(node));
}

Tensor& Tape::grad(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("loss is on a different tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    clear();
    return;
  }
  grad(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.sink != nullptr) {
      Tensor& sink = *node.sink;
      if (sink.empty()) sink = Tensor(node.value.shape());
      if (sink.shape() != node.grad.shape()) {
        throw DimensionError("gradient sink shape " +
                             shape_to_string(sink.shape()) +
                             " does not match " +
                             shape_to_string(node.grad.shape()));
      }
      for (std::size_t k = 0; k < sink.size(); ++k) sink[k] += node.grad[k];
    }
  }
  clear();
}

namespace {

void require_rank2(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_to_string(a.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t p = av.rows(), q = av.cols(), r = bv.cols();
  if (bv.rows() != q) {
    throw DimensionError("matmul: inner extents differ between " +
                         shape_to_string(av.shape()) + " and " +
                         shape_to_string(bv.shape()));
  }
  Tensor out({p, r});
  const double* A = av.data();
  const double* B = bv.data();
  double* O = out.data();
  for (std::size_t i = 0; i < p; ++i) {
    double* orow = O + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A[i * q + k];
      const double* brow = B + k * r;
      for (std::size_t j = 0; j < r; ++j) orow[j] += aik * brow[j];
    }
  }
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(out), {a, b},
      [ia, ib, p, q, r](Tape& t, const Tensor& g) {
        const double* G = g.data();
        const double* A = t.value(ia).data();
        const double* B = t.value(ib).data();
        if (t.requires_grad(ia)) {
          double* dA = t.grad(ia).data();
          for (std::size_t i = 0; i < p; ++i) {
            const double* grow = G + i * r;
            for (std::size_t k = 0; k < q; ++k) {
              const double* brow = B + k * r;
              double acc = 0.0;
              for (std::size_t j = 0; j < r; ++j) acc += grow[j] * brow[j];
              dA[i * q + k] += acc;
            }
          }
        }
        if (t.requires_grad(ib)) {
          double* dB = t.grad(ib).data();
          for (std::size_t i = 0; i < p; ++i) {
            const double* grow = G + i * r;
            for (std::size_t k = 0; k < q; ++k) {
              const double aik = A[i * q + k];
              double* dbrow = dB + k * r;
              for (std::size_t j = 0; j < r; ++j) dbrow[j] += aik * grow[j];
            }
          }
        }
      });
}

Var transpose(Var a) {
  require_rank2(a, "transpose");
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, r, c](Tape& t, const Tensor& g) {
                           Tensor& da = t.grad(ia);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               da[i * c + j] += g[j * r + i];
                         });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bv[k];
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& t, const Tensor& g) {
                           for (std::uint32_t id : {ia, ib}) {
                             if (!t.requires_grad(id)) continue;
                             Tensor& d = t.grad(id);
                             for (std::size_t k = 0; k < d.size(); ++k)
                               d[k] += g[k];
                           }
                         });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& t, const Tensor& g) {
                           if (t.requires_grad(ia)) {
                             Tensor& d = t.grad(ia);
                             for (std::size_t k = 0; k < d.size(); ++k)
                               d[k] += g[k];
                           }
                           if (t.requires_grad(ib)) {
                             Tensor& d = t.grad(ib);
                             for (std::size_t k = 0; k < d.size(); ++k)
                               d[k] -= g[k];
                           }
                         });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& t, const Tensor& g) {
                           if (t.requires_grad(ia)) {
                             Tensor& d = t.grad(ia);
                             const Tensor& other = t.value(ib);
                             for (std::size_t k = 0; k < d.size(); ++k)
                               d[k] += g[k] * other[k];
                           }
                           if (t.requires_grad(ib)) {
                             Tensor& d = t.grad(ib);
                             const Tensor& other = t.value(ia);
                             for (std::size_t k = 0; k < d.size(); ++k)
                               d[k] += g[k] * other[k];
                           }
                         });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, factor](Tape& t, const Tensor& g) {
                           Tensor& d = t.grad(ia);
                           for (std::size_t k = 0; k < d.size(); ++k)
                             d[k] += g[k] * factor;
                         });
}

Var add_row_bias(Var x, Var bias) {
  require_rank2(x, "add_row_bias");
  const std::size_t r = x.value().rows(), c = x.value().cols();
  if (bias.value().size() != c) {
    throw DimensionError("add_row_bias: bias " +
                         shape_to_string(bias.shape()) + " vs input " +
                         shape_to_string(x.shape()));
  }
  Tensor out = x.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
  const std::uint32_t ix = x.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, bias},
                         [ix, ib, r, c](Tape& t, const Tensor& g) {
                           if (t.requires_grad(ix)) {
                             Tensor& d = t.grad(ix);
                             for (std::size_t k = 0; k < d.size(); ++k)
                               d[k] += g[k];
                           }
                           if (t.requires_grad(ib)) {
                             Tensor& d = t.grad(ib);
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                 d[j] += g[i * c + j];
                           }
                         });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia](Tape& t, const Tensor& g) {
                           Tensor& d = t.grad(ia);
                           for (std::size_t k = 0; k < d.size(); ++k)
                             d[k] += g[k];
                         });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw DimensionError("layer_norm on empty shape");
  const std::size_t d = xv.shape().back();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: last extent " + std::to_string(d) +
                         " vs gain " + shape_to_string(gain.shape()) +
                         " and bias " + shape_to_string(bias.shape()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm eps must be positive");
  const std::size_t rows = xv.size() / d;
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  const std::uint32_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [ix, ig, ib, d, rows, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        if (t.requires_grad(ig)) {
          Tensor& dg = t.grad(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j)
              dg[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (t.requires_grad(ib)) {
          Tensor& db = t.grad(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) db[j] += g[r * d + j];
        }
        if (t.requires_grad(ix)) {
          const Tensor& gv = t.value(ig);
          Tensor& dx = t.grad(ix);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              mean_dh += dh;
              mean_dh_h += dh * xhat[r * d + j];
            }
            mean_dh *= inv_d;
            mean_dh_h *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              dx[r * d + j] +=
                  inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
            }
          }
        }
      });
}

Var gelu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) {
    v = v * 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  }
  const std::uint32_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ix);
    Tensor& dx = t.grad(ix);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t k = 0; k < dx.size(); ++k) {
      const double v = xv[k];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      dx[k] += g[k] * (cdf + v * pdf);
    }
  });
}

Var softmax(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) {
    throw DimensionError("softmax axis " + std::to_string(axis) +
                         " out of range for " + shape_to_string(xv.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t len = xv.dim(axis);
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xv[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  const std::uint32_t ix = x.id();
  const std::uint32_t iy = static_cast<std::uint32_t>(x.tape().size());
  return x.tape().record(
      std::move(out), {x}, [ix, iy, outer, inner, len](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(iy);
        Tensor& dx = t.grad(ix);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double dot = 0.0;
            for (std::size_t k = 0; k < len; ++k)
              dot += g[base + k * inner] * y[base + k * inner];
            for (std::size_t k = 0; k < len; ++k) {
              const std::size_t idx = base + k * inner;
              dx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  require_rank2(logits, "cross_entropy");
  const Tensor& lv = logits.value();
  const std::size_t batch = lv.rows(), classes = lv.cols();
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_to_string(lv.shape()));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw LabelError("label " + std::to_string(labels[i]) + " at index " +
                       std::to_string(i) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  std::vector<double> probs(lv.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = lv.data() + i * classes;
    const double mx = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      probs[i * classes + k] = std::exp(row[k] - mx);
      total += probs[i * classes + k];
    }
    for (std::size_t k = 0; k < classes; ++k) probs[i * classes + k] /= total;
    loss += mx + std::log(total) - row[labels[i]];
  }
  loss /= static_cast<double>(batch);
  const std::uint32_t il = logits.id();
  std::vector<int> label_copy(labels.begin(), labels.end());
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [il, batch, classes, probs = std::move(probs),
       label_copy = std::move(label_copy)](Tape& t, const Tensor& g) {
        Tensor& d = t.grad(il);
        const double s = g[0] / static_cast<double>(batch);
        for (std::size_t i = 0; i < batch; ++i) {
          for (std::size_t k = 0; k < classes; ++k) {
            const double target = static_cast<int>(k) == label_copy[i] ? 1.0 : 0.0;
            d[i * classes + k] += s * (probs[i * classes + k] - target);
          }
        }
      });
}

Var mean_squared_error(Var prediction, Var target) {
  require_same_shape(prediction, target, "mean_squared_error");
  const Tensor& pv = prediction.value();
  const Tensor& tv = target.value();
  double total = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    const double diff = pv[k] - tv[k];
    total += diff * diff;
  }
  const double count = static_cast<double>(pv.size());
  const std::uint32_t ip = prediction.id(), it = target.id();
  return prediction.tape().record(
      Tensor::scalar(total / count), {prediction, target},
      [ip, it, count](Tape& t, const Tensor& g) {
        const Tensor& pv = t.value(ip);
        const Tensor& tv = t.value(it);
        const double s = 2.0 * g[0] / count;
        if (t.requires_grad(ip)) {
          Tensor& d = t.grad(ip);
          for (std::size_t k = 0; k < d.size(); ++k) d[k] += s * (pv[k] - tv[k]);
        }
        if (t.requires_grad(it)) {
          Tensor& d = t.grad(it);
          for (std::size_t k = 0; k < d.size(); ++k) d[k] -= s * (pv[k] - tv[k]);
        }
      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::uint32_t ia = a.id();
  return a.tape().record(Tensor::scalar(total), {a},
                         [ia](Tape& t, const Tensor& g) {
                           Tensor& d = t.grad(ia);
                           for (std::size_t k = 0; k < d.size(); ++k) d[k] += g[0];
                         });
}

Var mean_rows(Var a) {
  require_rank2(a, "mean_rows");
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
  const double inv = 1.0 / static_cast<double>(r);
  for (double& v : out.values()) v *= inv;
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, r, c, inv](Tape& t, const Tensor& g) {
                           Tensor& d = t.grad(ia);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               d[i * c + j] += g[j] * inv;
                         });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
  require_rank2(a, "gather_rows");
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  Tensor out({indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= r) {
      throw DimensionError("gather_rows: row " + std::to_string(indices[i]) +
                           " out of range for " + shape_to_string(av.shape()));
    }
    std::copy_n(av.data() + indices[i] * c, c, out.data() + i * c);
  }
  const std::uint32_t ia = a.id();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return a.tape().record(std::move(out), {a},
                         [ia, c, idx = std::move(idx)](Tape& t, const Tensor& g) {
                           Tensor& d = t.grad(ia);
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               d[idx[i] * c + j] += g[i * c + j];
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  Tape& tape = parts.front().tape();
  const std::size_t c = parts.front().value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.value().cols() != c) {
      throw DimensionError("concat_rows: column mismatch " +
                           shape_to_string(p.shape()) + " vs " +
                           std::to_string(c));
    }
    total += p.value().rows();
  }
  Tensor out({total, c});
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t row = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + row * c);
    ids.push_back(p.id());
    offsets.push_back(row);
    row += p.value().rows();
  }
  Tape::BackwardFn fn = [ids, offsets, c](Tape& t, const Tensor& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& d = t.grad(ids[k]);
      const double* src = g.data() + offsets[k] * c;
      for (std::size_t e = 0; e < d.size(); ++e) d[e] += src[e];
    }
  };
  return tape.record(std::move(out), parts, std::move(fn));
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_cols");
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (count == 0 || begin + count > c) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_to_string(av.shape()));
  }
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(av.data() + i * c + begin, count, out.data() + i * count);
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, r, c, begin, count](Tape& t, const Tensor& g) {
                           Tensor& d = t.grad(ia);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < count; ++j)
                               d[i * c + begin + j] += g[i * count + j];
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t r = parts.front().value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.value().rows() != r) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_to_string(p.shape()) + " vs " +
                           std::to_string(r));
    }
    total += p.value().cols();
  }
  Tensor out({r, total});
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets, widths;
  std::size_t col = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().cols();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(p.value().data() + i * w, w, out.data() + i * total + col);
    ids.push_back(p.id());
    offsets.push_back(col);
    widths.push_back(w);
    col += w;
  }
  return parts.front().tape().record(
      std::move(out), parts,
      [ids, offsets, widths, r, total](Tape& t, const Tensor& g) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& d = t.grad(ids[k]);
          const std::size_t w = widths[k];
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j)
              d[i * w + j] += g[i * total + offsets[k] + j];
        }
      });
}

}  // namespace regionmim
