// Copyright 2026 The revmine Authors.
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

// Dense double-precision tensors with eager reverse-mode differentiation.
//
// Every op allocates a result node that keeps its inputs alive and knows how
// to push its gradient back into them. A graph is built per batch, consumed
// by backward() and released with the last Tensor handle. Graphs are not
// thread-safe; separate training runs must not share nodes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "revmine/error.hpp"
#include "revmine/random.hpp"

namespace revmine::tensor {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value.assign(tensor::numel(shape), 0.0);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (tensor::numel(shape) != values.size()) {
      throw DomainError("tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<double> values() { return node_->value; }
  std::span<const double> values() const { return node_->value; }
  double item() const {
    if (numel() != 1) throw DomainError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  /// Gradient buffer, zero-initialized on first access.
  std::span<double> grad() { return node_->ensure_grad(); }
  std::span<const double> grad() const { return node_->ensure_grad(); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

inline Tensor make(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    for (auto& in : inputs) n->parents.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

inline void require(bool ok, const std::string& op, const Shape& a, const Shape& b) {
  if (!ok) throw DomainError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

// Accumulates into a parent's gradient only when that parent needs one.
inline double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    const double* a = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      if (a[p] != 0.0) axpy(a[p], B + p * n, c, n);
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
inline void gemm_nt(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] += dot(A + i * k, B + j * k, k);
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
inline void gemm_tn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a = A + i * k;
    const double* b = B + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      if (a[p] != 0.0) axpy(a[p], b, C + p * n, n);
    }
  }
}

template <class F, class G>
Tensor unary(const Tensor& x, F f, G dfdx_from_y_x) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make(x.shape(), std::move(out), {x}, [dfdx_from_y_x](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xin = self.parents[0]->value;
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      gx[i] += self.grad[i] * dfdx_from_y_x(self.value[i], xin[i]);
    }
  });
}

}  // namespace detail

/// [m,k] x [k,n] -> [m,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  detail::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return detail::make({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* A = self.parents[0]->value.data();
    const double* B = self.parents[1]->value.data();
    if (double* gA = detail::grad_of(self, 0)) detail::gemm_nt(self.grad.data(), B, gA, m, n, k);
    if (double* gB = detail::grad_of(self, 1)) detail::gemm_tn(A, self.grad.data(), gB, m, k, n);
  });
}

/// Batched matmul: [g,m,k] x [g,k,n] -> [g,m,n], or with transpose_b
/// [g,m,k] x [g,n,k]^T -> [g,m,n].
inline Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false) {
  detail::require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) &&
                      a.dim(2) == (transpose_b ? b.dim(2) : b.dim(1)),
                  "bmm", a.shape(), b.shape());
  const std::size_t g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> out(g * m * n, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    const double* A = a.values().data() + i * m * k;
    const double* B = b.values().data() + i * k * n;
    double* C = out.data() + i * m * n;
    if (transpose_b) {
      detail::gemm_nt(A, B, C, m, k, n);
    } else {
      detail::gemm_nn(A, B, C, m, k, n);
    }
  }
  return detail::make({g, m, n}, std::move(out), {a, b}, [g, m, k, n, transpose_b](Node& self) {
    double* gA = detail::grad_of(self, 0);
    double* gB = detail::grad_of(self, 1);
    for (std::size_t i = 0; i < g; ++i) {
      const double* A = self.parents[0]->value.data() + i * m * k;
      const double* B = self.parents[1]->value.data() + i * k * n;
      const double* G = self.grad.data() + i * m * n;
      if (transpose_b) {
        // C = A B^T: dA = G B, dB = G^T A
        if (gA) detail::gemm_nn(G, B, gA + i * m * k, m, n, k);
        if (gB) detail::gemm_tn(G, A, gB + i * k * n, m, n, k);
      } else {
        if (gA) detail::gemm_nt(G, B, gA + i * m * k, m, n, k);
        if (gB) detail::gemm_tn(A, G, gB + i * k * n, m, k, n);
      }
    }
  });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require(a.shape() == b.shape(), "add", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = detail::grad_of(self, p)) detail::axpy(1.0, self.grad.data(), g, self.grad.size());
    }
  });
}

/// Adds a bias vector along the last dimension.
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
  detail::require(bias.rank() == 1 && x.rank() >= 1 && x.shape().back() == bias.dim(0), "add_bias", x.shape(),
                  bias.shape());
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); i += n) detail::axpy(1.0, bias.values().data(), out.data() + i, n);
  return detail::make(x.shape(), std::move(out), {x, bias}, [n](Node& self) {
    if (double* gx = detail::grad_of(self, 0)) detail::axpy(1.0, self.grad.data(), gx, self.grad.size());
    if (double* gb = detail::grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); i += n) detail::axpy(1.0, self.grad.data() + i, gb, n);
    }
  });
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require(a.shape() == b.shape(), "mul", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (double* ga = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += self.grad[i] * bv[i];
    }
    if (double* gb = detail::grad_of(self, 1)) {
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] += self.grad[i] * av[i];
    }
  });
}

inline Tensor scale(const Tensor& x, double c) {
  return detail::unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double, double xv) { return xv > 0.0 ? 1.0 : 0.0; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double y, double) { return 1.0 - y * y; });
}

/// Tanh approximation of the Gaussian error linear unit.
inline Tensor gelu(const Tensor& x) {
  static constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  return detail::unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); },
      [](double, double v) {
        const double t = std::tanh(c * (v + 0.044715 * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * v * v);
      });
}

inline double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(x, [](double v) { return sigmoid(v); }, [](double y, double) { return y * (1.0 - y); });
}

/// Row-wise softmax over the last dimension, max-subtracted.
inline Tensor softmax(const Tensor& x) {
  if (x.rank() < 1) throw DomainError("softmax: scalar input");
  const std::size_t n = x.shape().back();
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t r = 0; r < out.size(); r += n) {
    const double mx = *std::max_element(xv.begin() + static_cast<std::ptrdiff_t>(r),
                                        xv.begin() + static_cast<std::ptrdiff_t>(r + n));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (out[r + j] = std::exp(xv[r + j] - mx));
    for (std::size_t j = 0; j < n; ++j) out[r + j] /= s;
  }
  return detail::make(x.shape(), std::move(out), {x}, [n](Node& self) {
    double* gx = detail::grad_of(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < self.value.size(); r += n) {
      const double d = detail::dot(self.grad.data() + r, self.value.data() + r, n);
      for (std::size_t j = 0; j < n; ++j) gx[r + j] += self.value[r + j] * (self.grad[r + j] - d);
    }
  });
}

/// Concatenation along the last dimension; leading dimensions must agree.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DomainError("concat: no inputs");
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape pl(p.shape().begin(), p.shape().end() - 1);
    detail::require(p.rank() == parts[0].rank() && pl == lead, "concat", parts[0].shape(), p.shape());
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  const std::size_t rows = numel(lead);
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * widths[k], widths[k], out.data() + r * total + off);
    }
    off += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return detail::make(shape, std::move(out), parts, [widths, rows, total](Node& self) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = detail::grad_of(self, k)) {
        for (std::size_t r = 0; r < rows; ++r) {
          detail::axpy(1.0, self.grad.data() + r * total + o, g + r * widths[k], widths[k]);
        }
      }
      o += widths[k];
    }
  });
}

/// Columns [start, start + len) of the last dimension.
inline Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len) {
  const std::size_t n = x.shape().back();
  if (start + len > n) throw DomainError("slice_last: range exceeds " + shape_str(x.shape()));
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.values().data() + r * n + start, len, out.data() + r * len);
  Shape shape = x.shape();
  shape.back() = len;
  return detail::make(shape, std::move(out), {x}, [rows, n, start, len](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) detail::axpy(1.0, self.grad.data() + r * len, g + r * n + start, len);
    }
  });
}

/// Same values under a new shape of equal size.
inline Tensor reshape(const Tensor& x, Shape shape) {
  detail::require(numel(shape) == x.numel(), "reshape", x.shape(), shape);
  std::vector<double> out(x.values().begin(), x.values().end());
  return detail::make(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (double* g = detail::grad_of(self, 0)) detail::axpy(1.0, self.grad.data(), g, self.grad.size());
  });
}

/// [a, b, c, d] -> [a, c, b, d].
inline Tensor swap_middle(const Tensor& x) {
  if (x.rank() != 4) throw DomainError("swap_middle: expected rank 4, got " + shape_str(x.shape()));
  const std::size_t A = x.dim(0), B = x.dim(1), C = x.dim(2), D = x.dim(3);
  std::vector<double> out(x.numel());
  const double* in = x.values().data();
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) std::copy_n(in + ((a * B + b) * C + c) * D, D, out.data() + ((a * C + c) * B + b) * D);
  return detail::make({A, C, B, D}, std::move(out), {x}, [A, B, C, D](Node& self) {
    double* g = detail::grad_of(self, 0);
    if (!g) return;
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
          detail::axpy(1.0, self.grad.data() + ((a * C + c) * B + b) * D, g + ((a * B + b) * C + c) * D, D);
  });
}

/// Rows of a [n, d] tensor by index.
inline Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows) {
  if (x.rank() != 2) throw DomainError("gather_rows: expected rank 2, got " + shape_str(x.shape()));
  const std::size_t d = x.dim(1);
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw DomainError("gather_rows: row index out of range");
    std::copy_n(x.values().data() + rows[i] * d, d, out.data() + i * d);
  }
  return detail::make({rows.size(), d}, std::move(out), {x}, [rows = std::move(rows), d](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i) detail::axpy(1.0, self.grad.data() + i * d, g + rows[i] * d, d);
    }
  });
}

/// Looks up rows of a [vocab, dim] table; the result has shape lead + [dim].
inline Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids, Shape lead) {
  if (table.rank() != 2) throw DomainError("embedding_lookup: table must be rank 2");
  if (numel(lead) != ids.size()) throw DomainError("embedding_lookup: id count does not match " + shape_str(lead));
  const std::size_t d = table.dim(1);
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.dim(0)) {
      throw DomainError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table");
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(table.values().data() + rows[i] * d, d, out.data() + i * d);
  lead.push_back(d);
  return detail::make(std::move(lead), std::move(out), {table}, [rows = std::move(rows), d](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i) detail::axpy(1.0, self.grad.data() + i * d, g + rows[i] * d, d);
    }
  });
}

/// Valid-padding temporal convolution. x is [batch, time, dim]; weight is
/// [window * dim, filters] so each filter spans the full embedding width;
/// result is [batch, time - window + 1, filters].
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t window) {
  if (x.rank() != 3) throw DomainError("conv1d: expected [batch,time,dim], got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  detail::require(weight.rank() == 2 && weight.dim(0) == window * D, "conv1d", x.shape(), weight.shape());
  const std::size_t F = weight.dim(1);
  detail::require(bias.rank() == 1 && bias.dim(0) == F, "conv1d", weight.shape(), bias.shape());
  if (window == 0 || T < window) {
    throw DomainError("conv1d: sequence length " + std::to_string(T) + " shorter than window " + std::to_string(window));
  }
  const std::size_t P = T - window + 1;
  const std::size_t K = window * D;
  std::vector<double> out(B * P * F);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < P; ++p) std::copy_n(bias.values().data(), F, out.data() + (b * P + p) * F);
    // windows starting at consecutive positions are contiguous rows of length K
    // with stride D, so each batch element is one strided gemm
    const double* xb = x.values().data() + b * T * D;
    for (std::size_t p = 0; p < P; ++p) {
      double* o = out.data() + (b * P + p) * F;
      const double* xw = xb + p * D;
      for (std::size_t k = 0; k < K; ++k) {
        if (xw[k] != 0.0) detail::axpy(xw[k], weight.values().data() + k * F, o, F);
      }
    }
  }
  return detail::make({B, P, F}, std::move(out), {x, weight, bias}, [B, T, D, F, P, K](Node& self) {
    const double* X = self.parents[0]->value.data();
    const double* W = self.parents[1]->value.data();
    double* gx = detail::grad_of(self, 0);
    double* gw = detail::grad_of(self, 1);
    double* gb = detail::grad_of(self, 2);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t p = 0; p < P; ++p) {
        const double* g = self.grad.data() + (b * P + p) * F;
        const double* xw = X + b * T * D + p * D;
        if (gb) detail::axpy(1.0, g, gb, F);
        for (std::size_t k = 0; k < K; ++k) {
          if (gw && xw[k] != 0.0) detail::axpy(xw[k], g, gw + k * F, F);
          if (gx) gx[b * T * D + p * D + k] += detail::dot(W + k * F, g, F);
        }
      }
    }
  });
}

/// Max over the time axis: [time, f] -> [f] or [batch, time, f] -> [batch, f].
/// Ties route the gradient to the earliest position.
inline Tensor max_pool_over_time(const Tensor& x) {
  if (x.rank() != 2 && x.rank() != 3) throw DomainError("max_pool_over_time: bad shape " + shape_str(x.shape()));
  const bool batched = x.rank() == 3;
  const std::size_t B = batched ? x.dim(0) : 1;
  const std::size_t T = x.dim(batched ? 1 : 0);
  const std::size_t F = x.dim(batched ? 2 : 1);
  if (T == 0) throw DomainError("max_pool_over_time: empty time axis");
  std::vector<double> out(B * F);
  std::vector<std::size_t> arg(B * F);
  auto xv = x.values();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < T; ++t) {
        if (xv[(b * T + t) * F + f] > xv[(b * T + best) * F + f]) best = t;
      }
      arg[b * F + f] = (b * T + best) * F + f;
      out[b * F + f] = xv[arg[b * F + f]];
    }
  }
  Shape shape = batched ? Shape{B, F} : Shape{F};
  return detail::make(shape, std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    }
  });
}

/// Inverted dropout: in training each element is zeroed with probability p
/// and survivors are scaled by 1 / (1 - p). Identity when not training.
inline Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout: p must be in [0, 1)");
  if (!train || p == 0.0) return x;
  std::vector<double> mask(x.numel());
  const double keep = 1.0 / (1.0 - p);
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * mask[i];
  return detail::make(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < mask.size(); ++i) g[i] += self.grad[i] * mask[i];
    }
  });
}

inline Tensor dropout(const Tensor& x, double p, bool train, std::uint64_t seed) {
  Rng rng(seed);
  return dropout(x, p, train, rng);
}

/// out[i,:] = m_i * a[i,:] + (1 - m_i) * b[i,:] for constant row weights m.
inline Tensor blend_rows(std::span<const double> m, const Tensor& a, const Tensor& b) {
  detail::require(a.shape() == b.shape() && a.rank() == 2 && a.dim(0) == m.size(), "blend_rows", a.shape(),
                  b.shape());
  const std::size_t n = a.dim(1);
  std::vector<double> w(m.begin(), m.end());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = w[i] * a.values()[i * n + j] + (1.0 - w[i]) * b.values()[i * n + j];
    }
  }
  return detail::make(a.shape(), std::move(out), {a, b}, [w = std::move(w), n](Node& self) {
    double* ga = detail::grad_of(self, 0);
    double* gb = detail::grad_of(self, 1);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (ga) detail::axpy(w[i], self.grad.data() + i * n, ga + i * n, n);
      if (gb) detail::axpy(1.0 - w[i], self.grad.data() + i * n, gb + i * n, n);
    }
  });
}

/// Adds a constant to every element (no gradient to the constant).
inline Tensor add_constant(const Tensor& x, std::vector<double> c) {
  if (c.size() != x.numel()) throw DomainError("add_constant: size mismatch for " + shape_str(x.shape()));
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += x.values()[i];
  return detail::make(x.shape(), std::move(c), {x}, [](Node& self) {
    if (double* g = detail::grad_of(self, 0)) detail::axpy(1.0, self.grad.data(), g, self.grad.size());
  });
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return detail::make({}, {s}, {x}, [](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

/// Mean negative log-likelihood of one-hot targets under row probabilities
/// [batch, classes]; targets are class indices.
inline Tensor cross_entropy(const Tensor& probs, std::span<const int> targets) {
  if (probs.rank() != 2 || probs.dim(0) != targets.size()) {
    throw DomainError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + shape_str(probs.shape()));
  }
  const std::size_t B = probs.dim(0), C = probs.dim(1);
  static constexpr double tiny = std::numeric_limits<double>::min();
  std::vector<int> t(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (t[b] < 0 || static_cast<std::size_t>(t[b]) >= C) throw DomainError("cross_entropy: target out of range");
    loss -= std::log(std::max(probs.values()[b * C + static_cast<std::size_t>(t[b])], tiny));
  }
  loss /= static_cast<double>(B);
  return detail::make({}, {loss}, {probs}, [t = std::move(t), B, C](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      const auto& p = self.parents[0]->value;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t i = b * C + static_cast<std::size_t>(t[b]);
        g[i] -= self.grad[0] / (static_cast<double>(B) * std::max(p[i], tiny));
      }
    }
  });
}

/// Mean softmax cross-entropy computed from logits [batch, classes].
inline Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  return cross_entropy(softmax(logits), targets);
}

/// Mean binary cross-entropy from logits [batch, 1] and 0/1 targets, in the
/// overflow-free form max(z,0) - z*y + log(1 + exp(-|z|)).
inline Tensor binary_cross_entropy_with_logits(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 2 || logits.dim(1) != 1 || logits.dim(0) != targets.size()) {
    throw DomainError("binary_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                      shape_str(logits.shape()));
  }
  const std::size_t B = logits.dim(0);
  std::vector<int> t(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double z = logits.values()[b];
    loss += std::max(z, 0.0) - z * t[b] + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(B);
  return detail::make({}, {loss}, {logits}, [t = std::move(t), B](Node& self) {
    if (double* g = detail::grad_of(self, 0)) {
      const auto& z = self.parents[0]->value;
      for (std::size_t b = 0; b < B; ++b) g[b] += self.grad[0] * (sigmoid(z[b]) - t[b]) / static_cast<double>(B);
    }
  });
}

/// Normalizes each row of [n, d] to zero mean and unit variance, then applies
/// gamma and beta.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-12) {
  detail::require(x.rank() == 2 && gamma.rank() == 1 && gamma.dim(0) == x.dim(1) && beta.shape() == gamma.shape(),
                  "layer_norm", x.shape(), gamma.shape());
  const std::size_t N = x.dim(0), D = x.dim(1);
  std::vector<double> xhat(N * D), inv_std(N), out(N * D);
  for (std::size_t r = 0; r < N; ++r) {
    const double* xr = x.values().data() + r * D;
    double mu = 0.0;
    for (std::size_t j = 0; j < D; ++j) mu += xr[j];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t j = 0; j < D; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(D);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < D; ++j) {
      xhat[r * D + j] = (xr[j] - mu) * inv_std[r];
      out[r * D + j] = xhat[r * D + j] * gamma.values()[j] + beta.values()[j];
    }
  }
  return detail::make({N, D}, std::move(out), {x, gamma, beta},
                      [xhat = std::move(xhat), inv_std = std::move(inv_std), N, D](Node& self) {
                        const double* gam = self.parents[1]->value.data();
                        double* gx = detail::grad_of(self, 0);
                        double* gg = detail::grad_of(self, 1);
                        double* gbeta = detail::grad_of(self, 2);
                        std::vector<double> dxhat(D);
                        for (std::size_t r = 0; r < N; ++r) {
                          const double* g = self.grad.data() + r * D;
                          const double* xh = xhat.data() + r * D;
                          double s1 = 0.0, s2 = 0.0;
                          for (std::size_t j = 0; j < D; ++j) {
                            if (gg) gg[j] += g[j] * xh[j];
                            if (gbeta) gbeta[j] += g[j];
                            dxhat[j] = g[j] * gam[j];
                            s1 += dxhat[j];
                            s2 += dxhat[j] * xh[j];
                          }
                          if (!gx) continue;
                          const double invd = 1.0 / static_cast<double>(D);
                          for (std::size_t j = 0; j < D; ++j) {
                            gx[r * D + j] += inv_std[r] * (dxhat[j] - invd * s1 - xh[j] * invd * s2);
                          }
                        }
                      });
}

/// Populates gradients of every requires_grad ancestor of a scalar output.
/// Leaf gradients accumulate across calls until zeroed; intermediate
/// gradients are reset on each call.
inline void backward(const Tensor& output) {
  if (output.numel() != 1 || output.rank() != 0) {
    throw DomainError("backward: output must be a scalar, got " + shape_str(output.shape()));
  }
  if (!output.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node().get(), 0}};
  seen.insert(output.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  output.node()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter Adam moments.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamOptions options;

  explicit AdamState(std::size_t n = 0, AdamOptions opt = {})
      : first_moment(n, 0.0), second_moment(n, 0.0), options(opt) {}
};

/// One bias-corrected Adam update of `param` in place.
inline void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw DomainError("adam_step: learning rate must be positive");
  if (grad.size() != param.size() || state.first_moment.size() != param.size()) {
    throw DomainError("adam_step: parameter, gradient and state sizes differ");
  }
  const auto& o = state.options;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = o.beta1 * m + (1.0 - o.beta1) * grad[i];
    v = o.beta2 * v + (1.0 - o.beta2) * grad[i] * grad[i];
    param[i] -= lr * (m / c1) / (std::sqrt(v / c2) + o.epsilon);
  }
}

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamOptions options = {}) : params_(std::move(params)) {
    for (auto& p : params_) states_.emplace_back(p.numel(), options);
  }

  void step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) adam_step(params_[i].values(), params_[i].grad(), states_[i], lr);
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  const AdamState& state(std::size_t i) const { return states_.at(i); }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
};

/// Largest relative disagreement between reverse-mode and central-difference
/// gradients, |g_ad - g_fd| / max(1e-6, |g_ad| + |g_fd|). `loss` must rebuild
/// the graph from the current parameter values on every call. With
/// max_coords > 0 only that many seeded coordinates per parameter are probed.
inline double grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params, double eps = 1e-5,
                         std::size_t max_coords = 0, std::uint64_t seed = 0) {
  for (auto& p : params) p.zero_grad();
  backward(loss());
  double worst = 0.0;
  Rng rng(seed);
  for (auto& p : params) {
    std::vector<double> ad(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords > 0 && coords.size() > max_coords) {
      rng.shuffle(coords);
      coords.resize(max_coords);
    }
    for (auto i : coords) {
      const double orig = p.values()[i];
      p.values()[i] = orig + eps;
      const double up = loss().item();
      p.values()[i] = orig - eps;
      const double down = loss().item();
      p.values()[i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double err = std::abs(ad[i] - fd) / std::max(1e-6, std::abs(ad[i]) + std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace revmine::tensor
