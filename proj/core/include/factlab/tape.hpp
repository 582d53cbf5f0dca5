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

#ifndef FACTLAB_TAPE_HPP_
#define FACTLAB_TAPE_HPP_

#include <functional>
#include <vector>

#include "factlab/tensor.hpp"

namespace factlab {

/// Reverse-mode gradient tape. Ops append one backward closure per recorded
/// node; backward() seeds the scalar loss gradient and replays the closures
/// in reverse. Ops called with a null tape run forward-only (inference).
template <class T>
class Tape {
 public:
  void record(std::function<void()> backward_step) {
    nodes_.push_back(std::move(backward_step));
  }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  /// recorded tensor that requires them. `loss` must be a scalar.
  void backward(const TensorPtr<T>& loss) {
    if (loss->numel() != 1) throw NumericError("backward: loss is not a scalar");
    if (!loss->requires_grad) throw NumericError("backward: loss does not require grad");
    loss->g[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  void reset() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

}  // namespace factlab

#endif  // FACTLAB_TAPE_HPP_
