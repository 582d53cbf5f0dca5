// Copyright 2026 The factlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FACTLAB_OPS_HPP_
#define FACTLAB_OPS_HPP_

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <cstdint>
#include <vector>

#include "factlab/rng.hpp"
#include "factlab/tape.hpp"

namespace factlab {

namespace detail {

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<EMat<T>>;
template <class T>
using CMap = Eigen::Map<const EMat<T>>;

template <class T>
Map<T> as_matrix(Tensor<T>& t, std::int64_t rows, std::int64_t cols) {
  return Map<T>(t.v.data(), rows, cols);
}
template <class T>
CMap<T> as_cmatrix(const Tensor<T>& t, std::int64_t rows, std::int64_t cols) {
  return CMap<T>(t.v.data(), rows, cols);
}
template <class T>
Map<T> grad_matrix(Tensor<T>& t, std::int64_t rows, std::int64_t cols) {
  return Map<T>(t.g.data(), rows, cols);
}

template <class T>
bool wants_grad(Tape<T>* tape, std::initializer_list<const TensorPtr<T>*> inputs) {
  if (!tape) return false;
  for (auto* in : inputs)
    if ((*in)->requires_grad) return true;
  return false;
}

template <class T>
TensorPtr<T> make_output(std::vector<std::int64_t> shape, bool grad) {
  return make_tensor<T>(std::move(shape), grad);
}

}  // namespace detail

/// C[M,N] = A[M,K] * B[K,N]
template <class T>
TensorPtr<T> matmul(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  const std::int64_t m = a->rows(), k = a->cols(), k2 = b->rows(), n = b->cols();
  if (k != k2) throw NumericError("matmul: inner dimensions differ");
  bool grad = detail::wants_grad(tape, {&a, &b});
  auto out = detail::make_output<T>({m, n}, grad);
  detail::as_matrix(*out, m, n).noalias() =
      detail::as_cmatrix(*a, m, k) * detail::as_cmatrix(*b, k, n);
  check_finite(*out, "matmul");
  if (grad) {
    tape->record([a, b, out, m, k, n] {
      auto dout = detail::CMap<T>(out->g.data(), m, n);
      if (a->requires_grad)
        detail::grad_matrix(*a, m, k).noalias() += dout * detail::as_cmatrix(*b, k, n).transpose();
      if (b->requires_grad)
        detail::grad_matrix(*b, k, n).noalias() += detail::as_cmatrix(*a, m, k).transpose() * dout;
    });
  }
  return out;
}

/// C[M,N] = A[M,K] * B[N,K]^T (used for the weight-tied MLM head)
template <class T>
TensorPtr<T> matmul_nt(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  const std::int64_t m = a->rows(), k = a->cols(), n = b->rows();
  if (k != b->cols()) throw NumericError("matmul_nt: inner dimensions differ");
  bool grad = detail::wants_grad(tape, {&a, &b});
  auto out = detail::make_output<T>({m, n}, grad);
  detail::as_matrix(*out, m, n).noalias() =
      detail::as_cmatrix(*a, m, k) * detail::as_cmatrix(*b, n, k).transpose();
  check_finite(*out, "matmul_nt");
  if (grad) {
    tape->record([a, b, out, m, k, n] {
      auto dout = detail::CMap<T>(out->g.data(), m, n);
      if (a->requires_grad)
        detail::grad_matrix(*a, m, k).noalias() += dout * detail::as_cmatrix(*b, n, k);
      if (b->requires_grad)
        detail::grad_matrix(*b, n, k).noalias() += dout.transpose() * detail::as_cmatrix(*a, m, k);
    });
  }
  return out;
}

/// Elementwise sum of co-shaped tensors.
template <class T>
TensorPtr<T> add(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape) throw NumericError("add: shape mismatch");
  bool grad = detail::wants_grad(tape, {&a, &b});
  auto out = detail::make_output<T>(a->shape, grad);
  for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] + b->v[i];
  check_finite(*out, "add");
  if (grad) {
    tape->record([a, b, out] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < out->g.size(); ++i) b->g[i] += out->g[i];
    });
  }
  return out;
}

/// Broadcast add of a [N] bias over the rows of X[M,N].
template <class T>
TensorPtr<T> add_bias(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& bias) {
  const std::int64_t m = x->rows(), n = x->cols();
  if (bias->numel() != n) throw NumericError("add_bias: bias length mismatch");
  bool grad = detail::wants_grad(tape, {&x, &bias});
  auto out = detail::make_output<T>(x->shape, grad);
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t c = 0; c < n; ++c)
      out->v[static_cast<std::size_t>(r * n + c)] =
          x->v[static_cast<std::size_t>(r * n + c)] + bias->v[static_cast<std::size_t>(c)];
  check_finite(*out, "add_bias");
  if (grad) {
    tape->record([x, bias, out, m, n] {
      if (x->requires_grad)
        for (std::size_t i = 0; i < out->g.size(); ++i) x->g[i] += out->g[i];
      if (bias->requires_grad)
        for (std::int64_t r = 0; r < m; ++r)
          for (std::int64_t c = 0; c < n; ++c)
            bias->g[static_cast<std::size_t>(c)] += out->g[static_cast<std::size_t>(r * n + c)];
    });
  }
  return out;
}

/// Row gather from an embedding table: out[i, :] = table[ids[i], :].
template <class T>
TensorPtr<T> embedding_lookup(Tape<T>* tape, const TensorPtr<T>& table,
                              const std::vector<std::int32_t>& ids) {
  const std::int64_t v = table->rows(), h = table->cols();
  for (auto id : ids)
    if (id < 0 || id >= v) throw NumericError("embedding_lookup: id out of range");
  bool grad = detail::wants_grad(tape, {&table});
  auto out = detail::make_output<T>({static_cast<std::int64_t>(ids.size()), h}, grad);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(table->v.begin() + static_cast<std::ptrdiff_t>(ids[i]) * h, h,
                out->v.begin() + static_cast<std::ptrdiff_t>(i) * h);
  check_finite(*out, "embedding_lookup");
  if (grad) {
    tape->record([table, out, ids, h] {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        T* dst = table->g.data() + static_cast<std::ptrdiff_t>(ids[i]) * h;
        const T* src = out->g.data() + static_cast<std::ptrdiff_t>(i) * h;
        for (std::int64_t c = 0; c < h; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

/// Row gather by index: out[i, :] = x[rows[i], :].
template <class T>
TensorPtr<T> gather_rows(Tape<T>* tape, const TensorPtr<T>& x,
                         const std::vector<std::int32_t>& rows) {
  const std::int64_t m = x->rows(), h = x->cols();
  for (auto r : rows)
    if (r < 0 || r >= m) throw NumericError("gather_rows: row out of range");
  bool grad = detail::wants_grad(tape, {&x});
  auto out = detail::make_output<T>({static_cast<std::int64_t>(rows.size()), h}, grad);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x->v.begin() + static_cast<std::ptrdiff_t>(rows[i]) * h, h,
                out->v.begin() + static_cast<std::ptrdiff_t>(i) * h);
  check_finite(*out, "gather_rows");
  if (grad) {
    tape->record([x, out, rows, h] {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        T* dst = x->g.data() + static_cast<std::ptrdiff_t>(rows[i]) * h;
        const T* src = out->g.data() + static_cast<std::ptrdiff_t>(i) * h;
        for (std::int64_t c = 0; c < h; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

/// Softmax over the last dimension.
template <class T>
TensorPtr<T> row_softmax(Tape<T>* tape, const TensorPtr<T>& x) {
  const std::int64_t m = x->rows(), n = x->cols();
  bool grad = detail::wants_grad(tape, {&x});
  auto out = detail::make_output<T>(x->shape, grad);
  for (std::int64_t r = 0; r < m; ++r) {
    const T* xr = x->v.data() + r * n;
    T* yr = out->v.data() + r * n;
    T mx = xr[0];
    for (std::int64_t c = 1; c < n; ++c) mx = std::max(mx, xr[c]);
    T sum = T(0);
    for (std::int64_t c = 0; c < n; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    T inv = T(1) / sum;
    for (std::int64_t c = 0; c < n; ++c) yr[c] *= inv;
  }
  check_finite(*out, "row_softmax");
  if (grad) {
    tape->record([x, out, m, n] {
      if (!x->requires_grad) return;
      for (std::int64_t r = 0; r < m; ++r) {
        const T* y = out->v.data() + r * n;
        const T* dy = out->g.data() + r * n;
        T dot = T(0);
        for (std::int64_t c = 0; c < n; ++c) dot += dy[c] * y[c];
        T* dx = x->g.data() + r * n;
        for (std::int64_t c = 0; c < n; ++c) dx[c] += y[c] * (dy[c] - dot);
      }
    });
  }
  return out;
}

/// Per-row layer normalization with affine parameters over the last dim.
template <class T>
TensorPtr<T> layer_norm(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                        const TensorPtr<T>& beta, double eps) {
  const std::int64_t m = x->rows(), n = x->cols();
  if (gamma->numel() != n || beta->numel() != n)
    throw NumericError("layer_norm: affine parameter length mismatch");
  bool grad = detail::wants_grad(tape, {&x, &gamma, &beta});
  auto out = detail::make_output<T>(x->shape, grad);
  // Normalized activations and inverse stddevs are needed again in backward.
  auto xhat = std::make_shared<std::vector<T>>(x->v.size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(m));
  for (std::int64_t r = 0; r < m; ++r) {
    const T* xr = x->v.data() + r * n;
    T mean = T(0);
    for (std::int64_t c = 0; c < n; ++c) mean += xr[c];
    mean /= static_cast<T>(n);
    T var = T(0);
    for (std::int64_t c = 0; c < n; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<T>(n);
    T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*inv_std)[static_cast<std::size_t>(r)] = inv;
    T* hr = xhat->data() + r * n;
    T* yr = out->v.data() + r * n;
    for (std::int64_t c = 0; c < n; ++c) {
      hr[c] = (xr[c] - mean) * inv;
      yr[c] = hr[c] * gamma->v[static_cast<std::size_t>(c)] + beta->v[static_cast<std::size_t>(c)];
    }
  }
  check_finite(*out, "layer_norm");
  if (grad) {
    tape->record([x, gamma, beta, out, xhat, inv_std, m, n] {
      for (std::int64_t r = 0; r < m; ++r) {
        const T* dy = out->g.data() + r * n;
        const T* hr = xhat->data() + r * n;
        if (gamma->requires_grad || beta->requires_grad) {
          for (std::int64_t c = 0; c < n; ++c) {
            if (gamma->requires_grad) gamma->g[static_cast<std::size_t>(c)] += dy[c] * hr[c];
            if (beta->requires_grad) beta->g[static_cast<std::size_t>(c)] += dy[c];
          }
        }
        if (x->requires_grad) {
          T inv = (*inv_std)[static_cast<std::size_t>(r)];
          T sum_dh = T(0), sum_dh_h = T(0);
          for (std::int64_t c = 0; c < n; ++c) {
            T dh = dy[c] * gamma->v[static_cast<std::size_t>(c)];
            sum_dh += dh;
            sum_dh_h += dh * hr[c];
          }
          T* dx = x->g.data() + r * n;
          T invn = T(1) / static_cast<T>(n);
          for (std::int64_t c = 0; c < n; ++c) {
            T dh = dy[c] * gamma->v[static_cast<std::size_t>(c)];
            dx[c] += inv * (dh - invn * sum_dh - hr[c] * invn * sum_dh_h);
          }
        }
      }
    });
  }
  return out;
}

/// Exact (erf-based) GELU.
template <class T>
TensorPtr<T> gelu(Tape<T>* tape, const TensorPtr<T>& x) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  bool grad = detail::wants_grad(tape, {&x});
  auto out = detail::make_output<T>(x->shape, grad);
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  auto n = static_cast<Eigen::Index>(x->v.size());
  Eigen::Map<const Arr> xs(x->v.data(), n);
  Eigen::Map<Arr>(out->v.data(), n) = T(0.5) * xs * (T(1) + (xs * inv_sqrt2).erf());
  check_finite(*out, "gelu");
  if (grad) {
    tape->record([x, out, n] {
      if (!x->requires_grad) return;
      const T inv_sqrt2b = static_cast<T>(0.70710678118654752440);
      const T inv_sqrt2pi = static_cast<T>(0.39894228040143267794);
      Eigen::Map<const Arr> xs(x->v.data(), n);
      Eigen::Map<const Arr> dy(out->g.data(), n);
      // d/dx = Phi(x) + x * phi(x)
      Eigen::Map<Arr>(x->g.data(), n) +=
          dy * (T(0.5) * (T(1) + (xs * inv_sqrt2b).erf()) +
                xs * inv_sqrt2pi * (T(-0.5) * xs * xs).exp());
    });
  }
  return out;
}

/// Per-head scaled dot-product scores. Q and K are [batch*seq, hidden];
/// rows of the output are indexed ((b*heads + h)*seq + i) with seq columns.
template <class T>
TensorPtr<T> attention_scores(Tape<T>* tape, const TensorPtr<T>& q, const TensorPtr<T>& k,
                              std::int64_t batch, std::int64_t seq, std::int64_t heads) {
  const std::int64_t hidden = q->cols();
  if (q->shape != k->shape || q->rows() != batch * seq || hidden % heads != 0)
    throw NumericError("attention_scores: bad shapes");
  const std::int64_t dh = hidden / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  bool grad = detail::wants_grad(tape, {&q, &k});
  auto out = detail::make_output<T>({batch * heads * seq, seq}, grad);
  using Stride = Eigen::Stride<Eigen::Dynamic, 1>;
  auto head_block = [&](const TensorPtr<T>& t, std::int64_t b, std::int64_t h) {
    return Eigen::Map<const detail::EMat<T>, 0, Stride>(
        t->v.data() + (b * seq) * hidden + h * dh, seq, dh, Stride(hidden, 1));
  };
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t h = 0; h < heads; ++h) {
      detail::Map<T> s(out->v.data() + ((b * heads + h) * seq) * seq, seq, seq);
      s.noalias() = head_block(q, b, h) * head_block(k, b, h).transpose() * scale;
    }
  check_finite(*out, "attention_scores");
  if (grad) {
    tape->record([q, k, out, batch, seq, heads, dh, hidden, scale] {
      using StrideT = Eigen::Stride<Eigen::Dynamic, 1>;
      for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t h = 0; h < heads; ++h) {
          detail::CMap<T> ds(out->g.data() + ((b * heads + h) * seq) * seq, seq, seq);
          Eigen::Map<const detail::EMat<T>, 0, StrideT> qb(
              q->v.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
          Eigen::Map<const detail::EMat<T>, 0, StrideT> kb(
              k->v.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
          if (q->requires_grad) {
            Eigen::Map<detail::EMat<T>, 0, StrideT> dq(
                q->g.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
            dq.noalias() += ds * kb * scale;
          }
          if (k->requires_grad) {
            Eigen::Map<detail::EMat<T>, 0, StrideT> dk(
                k->g.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
            dk.noalias() += ds.transpose() * qb * scale;
          }
        }
    });
  }
  return out;
}

/// Applies attention weights to values: per (batch, head) block,
/// out = P * V. P is [batch*heads*seq, seq], V and out are [batch*seq, hidden].
template <class T>
TensorPtr<T> attention_mix(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& v,
                           std::int64_t batch, std::int64_t seq, std::int64_t heads) {
  const std::int64_t hidden = v->cols();
  if (p->rows() != batch * heads * seq || p->cols() != seq || v->rows() != batch * seq ||
      hidden % heads != 0)
    throw NumericError("attention_mix: bad shapes");
  const std::int64_t dh = hidden / heads;
  bool grad = detail::wants_grad(tape, {&p, &v});
  auto out = detail::make_output<T>({batch * seq, hidden}, grad);
  using Stride = Eigen::Stride<Eigen::Dynamic, 1>;
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t h = 0; h < heads; ++h) {
      detail::CMap<T> pb(p->v.data() + ((b * heads + h) * seq) * seq, seq, seq);
      Eigen::Map<const detail::EMat<T>, 0, Stride> vb(
          v->v.data() + (b * seq) * hidden + h * dh, seq, dh, Stride(hidden, 1));
      Eigen::Map<detail::EMat<T>, 0, Stride> ob(out->v.data() + (b * seq) * hidden + h * dh, seq,
                                                dh, Stride(hidden, 1));
      ob.noalias() = pb * vb;
    }
  check_finite(*out, "attention_mix");
  if (grad) {
    tape->record([p, v, out, batch, seq, heads, dh, hidden] {
      using StrideT = Eigen::Stride<Eigen::Dynamic, 1>;
      for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t h = 0; h < heads; ++h) {
          Eigen::Map<const detail::EMat<T>, 0, StrideT> dout(
              out->g.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
          detail::CMap<T> pb(p->v.data() + ((b * heads + h) * seq) * seq, seq, seq);
          Eigen::Map<const detail::EMat<T>, 0, StrideT> vb(
              v->v.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
          if (p->requires_grad) {
            detail::Map<T> dp(p->g.data() + ((b * heads + h) * seq) * seq, seq, seq);
            dp.noalias() += dout * vb.transpose();
          }
          if (v->requires_grad) {
            Eigen::Map<detail::EMat<T>, 0, StrideT> dv(
                v->g.data() + (b * seq) * hidden + h * dh, seq, dh, StrideT(hidden, 1));
            dv.noalias() += pb.transpose() * dout;
          }
        }
    });
  }
  return out;
}

/// Inverted dropout; identity when rate == 0 or tape is null (inference).
template <class T>
TensorPtr<T> dropout(Tape<T>* tape, const TensorPtr<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw NumericError("dropout: rate must be < 1");
  if (!tape) return x;
  bool grad = x->requires_grad;
  auto out = detail::make_output<T>(x->shape, grad);
  auto mask = std::make_shared<std::vector<T>>(x->v.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x->v.size(); ++i) {
    (*mask)[i] = rng.bernoulli(rate) ? T(0) : keep_scale;
    out->v[i] = x->v[i] * (*mask)[i];
  }
  check_finite(*out, "dropout");
  if (grad) {
    tape->record([x, out, mask] {
      for (std::size_t i = 0; i < x->v.size(); ++i) x->g[i] += out->g[i] * (*mask)[i];
    });
  }
  return out;
}

/// Mean cross entropy over rows of `logits` against integer targets,
/// computed via a numerically stable log-sum-exp. Returns a scalar.
template <class T>
TensorPtr<T> cross_entropy_mean(Tape<T>* tape, const TensorPtr<T>& logits,
                                const std::vector<std::int32_t>& targets) {
  const std::int64_t m = logits->rows(), n = logits->cols();
  if (static_cast<std::int64_t>(targets.size()) != m)
    throw NumericError("cross_entropy: target count mismatch");
  if (m == 0) throw NumericError("cross_entropy: empty batch");
  for (auto t : targets)
    if (t < 0 || t >= n) throw NumericError("cross_entropy: target out of range");
  bool grad = detail::wants_grad(tape, {&logits});
  auto out = detail::make_output<T>({1}, grad);
  auto lse = std::make_shared<std::vector<T>>(static_cast<std::size_t>(m));
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  double total = 0.0;
  for (std::int64_t r = 0; r < m; ++r) {
    const T* xr = logits->v.data() + r * n;
    Eigen::Map<const Arr> row(xr, n);
    T mx = row.maxCoeff();
    double sum = static_cast<double>((row - mx).exp().sum());
    double l = static_cast<double>(mx) + std::log(sum);
    (*lse)[static_cast<std::size_t>(r)] = static_cast<T>(l);
    total += l - static_cast<double>(xr[targets[static_cast<std::size_t>(r)]]);
  }
  out->v[0] = static_cast<T>(total / static_cast<double>(m));
  check_finite(*out, "cross_entropy");
  if (grad) {
    tape->record([logits, out, targets, lse, m, n] {
      if (!logits->requires_grad) return;
      const T upstream = out->g[0] / static_cast<T>(m);
      for (std::int64_t r = 0; r < m; ++r) {
        Eigen::Map<const Arr> row(logits->v.data() + r * n, n);
        Eigen::Map<Arr> dx(logits->g.data() + r * n, n);
        dx += upstream * (row - (*lse)[static_cast<std::size_t>(r)]).exp();
        dx[targets[static_cast<std::size_t>(r)]] -= upstream;
      }
    });
  }
  return out;
}

}  // namespace factlab

#endif  // FACTLAB_OPS_HPP_
