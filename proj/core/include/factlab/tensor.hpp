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

#ifndef FACTLAB_TENSOR_HPP_
#define FACTLAB_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <new>
#include <numeric>
#include <string>
#include <vector>

#include "factlab/util.hpp"

namespace factlab {

/// 64-byte-aligned storage. Fixing the alignment keeps vectorized kernels on
/// identical code paths across runs, which bitwise reproducibility needs
/// (the SIMD prologue of an unaligned buffer depends on its address).
template <class T, std::size_t kAlign = 64>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, kAlign>&) {}

  T* allocate(std::size_t n) {
    std::size_t bytes = (n * sizeof(T) + kAlign - 1) / kAlign * kAlign;
    void* p = std::aligned_alloc(kAlign, bytes);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { std::free(p); }

  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, kAlign>;
  };
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <class T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array with an optional co-shaped gradient buffer.
/// T is float for training and double for gradient verification.
template <class T>
struct Tensor {
  std::vector<std::int64_t> shape;
  AlignedVec<T> v;
  AlignedVec<T> g;  // allocated (zeroed) iff requires_grad
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s, bool grad = false)
      : shape(std::move(s)), requires_grad(grad) {
    v.assign(static_cast<std::size_t>(numel()), T(0));
    if (grad) g.assign(v.size(), T(0));
  }

  std::int64_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                           [](std::int64_t a, std::int64_t b) { return a * b; });
  }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }
  /// Rows/cols of the 2-D view [numel/last, last].
  std::int64_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::int64_t rows() const { return cols() == 0 ? 0 : numel() / cols(); }

  void enable_grad() {
    requires_grad = true;
    g.assign(v.size(), T(0));
  }
  void zero_grad() {
    if (requires_grad) std::fill(g.begin(), g.end(), T(0));
  }
};

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <class T>
TensorPtr<T> make_tensor(std::vector<std::int64_t> shape, bool grad = false) {
  return std::make_shared<Tensor<T>>(std::move(shape), grad);
}

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  // x - x is 0 for finite x and NaN for NaN/Inf; the sum stays vectorizable
  // and goes NaN iff any element is non-finite.
  T acc = T(0);
  for (const T& x : t.v) acc += x - x;
  if (!(acc == T(0)))
    throw NumericError(std::string("non-finite value produced by ") + op);
}

}  // namespace factlab

#endif  // FACTLAB_TENSOR_HPP_
