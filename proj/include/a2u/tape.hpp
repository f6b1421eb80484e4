/* Copyright (c) 2026 The a2u-lab Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef A2U_TAPE_HPP_
#define A2U_TAPE_HPP_

#include <atomic>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "a2u/tensor.hpp"

namespace a2u {

/// Reverse-mode tape. Ops append one record each in execution order; the
/// records are topologically ordered by construction, and backward() replays
/// them exactly once in reverse. Tracking is scoped to one tape: a tensor
/// marked by an earlier tape counts as untracked here.
template <typename T>
class Tape {
 public:
  Tape() : epoch_(next_epoch()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf whose gradient should be accumulated.
  void watch(Tensor<T>& t) {
    if (tracks(t)) return;
    t.ensure_grad();
    t.set_tracking(epoch_, next_node_++);
    involve(t);
  }

  bool tracks(const Tensor<T>& t) const { return t.tape_epoch() == epoch_ && t.node() >= 0; }

  /// Marks an op output as tracked by this tape.
  void mark(Tensor<T>& out) {
    out.ensure_grad();
    out.set_tracking(epoch_, next_node_++);
    involve(out);
  }

  /// Appends a backward record. The closure adds into the grad buffers of the
  /// op inputs, reading the grad buffer of the op output.
  void push(std::function<void()> backfn) { records_.push_back(std::move(backfn)); }

  size_t num_records() const { return records_.size(); }

  /// Reverse accumulation from a scalar tracked loss. All grads touched by
  /// this tape are zeroed first, so repeated calls do not accumulate.
  void backward(Tensor<T>& loss) {
    A2U_CHECK(loss.size() == 1, "backward needs a scalar loss, got " << shape_str(loss.shape()));
    A2U_CHECK(tracks(loss), "loss is not on this tape (detached leaf or wrong tape)");
    for (auto& t : involved_) t.zero_grad();
    loss.grad()[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

 private:
  static uint64_t next_epoch() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  void involve(const Tensor<T>& t) {
    if (seen_.insert(t.storage_key()).second) involved_.push_back(t);
  }

  uint64_t epoch_;
  int next_node_ = 0;
  std::vector<std::function<void()>> records_;
  std::vector<Tensor<T>> involved_;
  std::unordered_set<const void*> seen_;
};

namespace detail {

/// True when the op should record a backward closure.
template <typename T, typename... Ts>
bool recording(Tape<T>* tape, const Ts&... inputs) {
  return tape != nullptr && (tape->tracks(inputs) || ...);
}

}  // namespace detail

}  // namespace a2u

#endif  // A2U_TAPE_HPP_
