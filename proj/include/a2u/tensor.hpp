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

#ifndef A2U_TENSOR_HPP_
#define A2U_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "a2u/check.hpp"

namespace a2u {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    A2U_CHECK(d > 0, "non-positive dimension " << d);
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream oss;
  oss << "[";
  for (size_t i = 0; i < shape.size(); ++i) oss << (i ? "," : "") << shape[i];
  oss << "]";
  return oss.str();
}

/// Dense N-dimensional array, contiguous row-major. A Tensor is a handle onto
/// shared storage: copies and reshaped views all address one payload holding
/// the values, the optional same-shape gradient buffer, and the tape-tracking
/// state. Ops treat their inputs as immutable by convention; the backward
/// pass and the optimizer write through handles, and every handle of a leaf
/// sees the effect.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), p_(std::make_shared<Payload>()) {
    p_->data.assign(numel(shape_), T(0));
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    A2U_CHECK(static_cast<int64_t>(values.size()) == numel(shape_),
              "value count " << values.size() << " does not match shape " << shape_str(shape_));
    p_ = std::make_shared<Payload>();
    p_->data = std::move(values);
  }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.p_->data.begin(), t.p_->data.end(), value);
    return t;
  }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }
  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  bool defined() const { return p_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const {
    A2U_CHECK(i >= 0 && i < ndim(), "dim index " << i << " out of range for " << shape_str(shape_));
    return shape_[i];
  }
  int64_t size() const { return p_ ? static_cast<int64_t>(p_->data.size()) : 0; }

  T* data() const { return p_->data.data(); }
  T& operator[](int64_t i) const { return p_->data[i]; }

  int64_t offset4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  T& at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return p_->data[offset4(n, c, h, w)];
  }

  // --- gradient buffer (shared by all handles) ------------------------------

  bool has_grad() const { return p_ && !p_->grad.empty(); }
  void ensure_grad() {
    if (p_->grad.empty()) p_->grad.assign(p_->data.size(), T(0));
  }
  void zero_grad() {
    if (p_) std::fill(p_->grad.begin(), p_->grad.end(), T(0));
  }
  T* grad() const { return p_->grad.data(); }

  // --- tape bookkeeping (shared by all handles) -----------------------------

  uint64_t tape_epoch() const { return p_ ? p_->epoch : 0; }
  int node() const { return p_ ? p_->node : -1; }
  void set_tracking(uint64_t epoch, int node) {
    p_->epoch = epoch;
    p_->node = node;
  }

  /// Stable identity of the shared payload (for deduplication).
  const void* storage_key() const { return p_.get(); }

  // --- views / copies -------------------------------------------------------

  /// Same payload under a new shape (same element count).
  Tensor reshaped(Shape shape) const {
    A2U_CHECK(numel(shape) == size(),
              "reshape " << shape_str(shape_) << " -> " << shape_str(shape) << " changes size");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  /// Deep copy of the values; untracked, no grad buffer.
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.p_ = std::make_shared<Payload>();
    t.p_->data = p_->data;
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(p_->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(p_->data[i]);
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  template <typename U>
  friend class Tensor;

  struct Payload {
    std::vector<T> data;
    std::vector<T> grad;  // empty until a tape needs it
    uint64_t epoch = 0;
    int node = -1;
  };

  Shape shape_;
  std::shared_ptr<Payload> p_;
};

/// Every op output must be finite; NaN/Inf is surfaced, never propagated.
template <typename T>
void require_finite(const Tensor<T>& t, const char* where) {
  const T* p = t.data();
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) {
      std::ostringstream oss;
      oss << "non-finite value " << p[i] << " at index " << i << " in " << where;
      throw NumericError(oss.str());
    }
  }
}

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape();
}

}  // namespace a2u

#endif  // A2U_TENSOR_HPP_
