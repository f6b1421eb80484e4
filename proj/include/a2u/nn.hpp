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

#ifndef A2U_NN_HPP_
#define A2U_NN_HPP_

#include <type_traits>
#include <string>
#include <unordered_map>
#include <vector>

#include "a2u/conv.hpp"
#include "a2u/ops.hpp"
#include "a2u/rng.hpp"

namespace a2u {

// ---------------------------------------------------------------------------
// Parameter registry
// ---------------------------------------------------------------------------

/// Named leaf tensors in insertion order. Registered tensors share storage
/// with the module that owns them, so optimizer updates are visible in place.
template <typename T>
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> tensor, bool trainable = true) {
    A2U_CHECK(index_.find(name) == index_.end(), "duplicate parameter name '" << name << "'");
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, std::move(tensor), trainable});
    return entries_.back().tensor;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    A2U_CHECK(it != index_.end(), "unknown parameter '" << name << "'");
    return entries_[it->second].tensor;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  /// Trainable scalar count.
  int64_t count_params() const {
    int64_t n = 0;
    for (const auto& e : entries_) {
      if (e.trainable) n += e.tensor.size();
    }
    return n;
  }

  void watch_all(Tape<T>& tape) {
    for (auto& e : entries_) {
      if (e.trainable) tape.watch(e.tensor);
    }
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Fan-in scaled uniform U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
Tensor<T> fan_in_uniform(const Shape& shape, int64_t fan_in, Rng& rng) {
  A2U_CHECK(fan_in >= 1, "fan_in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return rng.uniform_tensor<T>(shape, -bound, bound);
}

/// Conv weights [O, I/g, kh, kw]: fan_in = (I/g) * kh * kw.
template <typename T>
Tensor<T> conv_weight_init(const Shape& shape, Rng& rng) {
  A2U_CHECK(shape.size() == 4, "conv weight must be 4-D");
  return fan_in_uniform<T>(shape, shape[1] * shape[2] * shape[3], rng);
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BnState {
  Tensor<T> running_mean;  // [C]
  Tensor<T> running_var;   // [C]

  void init(int64_t c) {
    running_mean = Tensor<T>::zeros({c});
    running_var = Tensor<T>::ones({c});
  }
};

/// Training mode normalizes with batch statistics (biased variance, eps added
/// inside the square root) and updates running stats with the given momentum;
/// the running variance is stored unbiased. Inference mode is a pure function
/// of the running statistics.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BnState<T>& state, bool training, Tape<std::type_identity_t<T>>* tape = nullptr, T eps = T(1e-5),
                      T momentum = T(0.1)) {
  A2U_CHECK(x.ndim() == 4, "batchnorm2d expects NCHW");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  A2U_CHECK(gamma.ndim() == 1 && gamma.dim(0) == c && beta.ndim() == 1 && beta.dim(0) == c,
            "batchnorm2d: gamma/beta length vs C=" << c);
  A2U_CHECK(state.running_mean.size() == c && state.running_var.size() == c,
            "batchnorm2d: running stats length vs C=" << c);
  const int64_t m = n * hw;
  Tensor<T> y(x.shape());

  if (!training) {
    std::vector<T> scale(c), shift(c);
    for (int64_t cc = 0; cc < c; ++cc) {
      const T inv = T(1) / std::sqrt(state.running_var[cc] + eps);
      scale[cc] = gamma[cc] * inv;
      shift[cc] = beta[cc] - scale[cc] * state.running_mean[cc];
    }
    for (int64_t b = 0; b < n; ++b)
      for (int64_t cc = 0; cc < c; ++cc) {
        const T* src = x.data() + (b * c + cc) * hw;
        T* dst = y.data() + (b * c + cc) * hw;
        for (int64_t j = 0; j < hw; ++j) dst[j] = scale[cc] * src[j] + shift[cc];
      }
    require_finite(y, "batchnorm2d");
    if (detail::recording(tape, x, gamma, beta)) {
      tape->mark(y);
      const bool tx = tape->tracks(x), tg = tape->tracks(gamma), tb = tape->tracks(beta);
      Tensor<T> rm = state.running_mean.clone(), rv = state.running_var.clone();
      tape->push([x, gamma, beta, y, rm, rv, eps, n, c, hw, tx, tg, tb]() mutable {
        const T* gy = y.grad();
        for (int64_t cc = 0; cc < c; ++cc) {
          const T inv = T(1) / std::sqrt(rv[cc] + eps);
          for (int64_t b = 0; b < n; ++b) {
            const int64_t off = (b * c + cc) * hw;
            for (int64_t j = 0; j < hw; ++j) {
              const T g = gy[off + j];
              if (tx) x.grad()[off + j] += g * gamma[cc] * inv;
              if (tg) gamma.grad()[cc] += g * (x[off + j] - rm[cc]) * inv;
              if (tb) beta.grad()[cc] += g;
            }
          }
        }
      });
    }
    return y;
  }

  // Training mode.
  std::vector<T> mean(c, T(0)), var(c, T(0)), inv(c);
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc) {
      const T* src = x.data() + (b * c + cc) * hw;
      T acc = T(0);
      for (int64_t j = 0; j < hw; ++j) acc += src[j];
      mean[cc] += acc;
    }
  for (int64_t cc = 0; cc < c; ++cc) mean[cc] /= static_cast<T>(m);
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc) {
      const T* src = x.data() + (b * c + cc) * hw;
      T acc = T(0);
      for (int64_t j = 0; j < hw; ++j) {
        const T d = src[j] - mean[cc];
        acc += d * d;
      }
      var[cc] += acc;
    }
  Tensor<T> xhat(x.shape());
  for (int64_t cc = 0; cc < c; ++cc) {
    var[cc] /= static_cast<T>(m);
    inv[cc] = T(1) / std::sqrt(var[cc] + eps);
  }
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc) {
      const int64_t off = (b * c + cc) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        xhat[off + j] = (x[off + j] - mean[cc]) * inv[cc];
        y[off + j] = gamma[cc] * xhat[off + j] + beta[cc];
      }
    }
  require_finite(y, "batchnorm2d");

  const T unbias = m > 1 ? static_cast<T>(m) / static_cast<T>(m - 1) : T(1);
  for (int64_t cc = 0; cc < c; ++cc) {
    state.running_mean[cc] = (T(1) - momentum) * state.running_mean[cc] + momentum * mean[cc];
    state.running_var[cc] = (T(1) - momentum) * state.running_var[cc] + momentum * var[cc] * unbias;
  }

  if (detail::recording(tape, x, gamma, beta)) {
    tape->mark(y);
    const bool tx = tape->tracks(x), tg = tape->tracks(gamma), tb = tape->tracks(beta);
    auto invv = inv;
    tape->push([x, gamma, beta, y, xhat, invv, n, c, hw, m, tx, tg, tb]() mutable {
      const T* gy = y.grad();
      for (int64_t cc = 0; cc < c; ++cc) {
        T sum_g = T(0), sum_gx = T(0);
        for (int64_t b = 0; b < n; ++b) {
          const int64_t off = (b * c + cc) * hw;
          for (int64_t j = 0; j < hw; ++j) {
            sum_g += gy[off + j];
            sum_gx += gy[off + j] * xhat[off + j];
          }
        }
        if (tg) gamma.grad()[cc] += sum_gx;
        if (tb) beta.grad()[cc] += sum_g;
        if (tx) {
          const T k = gamma[cc] * invv[cc];
          const T mg = sum_g / static_cast<T>(m);
          const T mgx = sum_gx / static_cast<T>(m);
          for (int64_t b = 0; b < n; ++b) {
            const int64_t off = (b * c + cc) * hw;
            for (int64_t j = 0; j < hw; ++j)
              x.grad()[off + j] += k * (gy[off + j] - mg - xhat[off + j] * mgx);
          }
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Conv + BatchNorm + ReLU block
// ---------------------------------------------------------------------------

enum class NormKind { None, BatchNorm };

template <typename T>
struct LayerBlock {
  ConvSpec spec;
  Tensor<T> w, b;
  NormKind norm = NormKind::BatchNorm;
  bool relu_after = true;
  Tensor<T> gamma, beta;
  BnState<T> bn;

  void init(Rng& rng) {
    spec.validate();
    w = conv_weight_init<T>(spec.weight_shape(), rng);
    if (spec.has_bias) b = Tensor<T>::zeros({spec.out_channels});
    if (norm == NormKind::BatchNorm) {
      gamma = Tensor<T>::ones({spec.out_channels});
      beta = Tensor<T>::zeros({spec.out_channels});
      bn.init(spec.out_channels);
    }
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add(prefix + ".w", w);
    if (spec.has_bias) reg.add(prefix + ".b", b);
    if (norm == NormKind::BatchNorm) {
      reg.add(prefix + ".gamma", gamma);
      reg.add(prefix + ".beta", beta);
      reg.add(prefix + ".running_mean", bn.running_mean, /*trainable=*/false);
      reg.add(prefix + ".running_var", bn.running_var, /*trainable=*/false);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool training, Tape<std::type_identity_t<T>>* tape) {
    Tensor<T> y = conv2d(x, spec, w, spec.has_bias ? &b : nullptr, tape);
    if (norm == NormKind::BatchNorm) y = batchnorm2d(y, gamma, beta, bn, training, tape);
    if (relu_after) y = relu(y, tape);
    return y;
  }
};

// ---------------------------------------------------------------------------
// SGD with momentum
// ---------------------------------------------------------------------------

/// v <- mu * v + g; w <- w - lr * v.
template <typename T>
class Sgd {
 public:
  Sgd(T lr, T momentum) : lr_(lr), momentum_(momentum) {}

  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }

  void step(ParamRegistry<T>& params) {
    for (auto& e : params.entries()) {
      if (!e.trainable) continue;
      A2U_CHECK(e.tensor.has_grad(), "missing grad for trainable leaf '" << e.name << "'");
      auto& v = velocity_[e.name];
      if (v.empty()) v.assign(e.tensor.size(), T(0));
      A2U_CHECK(static_cast<int64_t>(v.size()) == e.tensor.size(),
                "velocity shape drifted for '" << e.name << "'");
      T* w = e.tensor.data();
      const T* g = e.tensor.grad();
      for (int64_t i = 0; i < e.tensor.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i];
        w[i] -= lr_ * v[i];
      }
    }
  }

 private:
  T lr_;
  T momentum_;
  std::unordered_map<std::string, std::vector<T>> velocity_;
};

}  // namespace a2u

#endif  // A2U_NN_HPP_
