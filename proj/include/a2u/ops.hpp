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

#ifndef A2U_OPS_HPP_
#define A2U_OPS_HPP_

#include <algorithm>
#include <type_traits>
#include <cmath>
#include <cstdint>
#include <vector>

#include "a2u/tape.hpp"
#include "a2u/tensor.hpp"

namespace a2u {

// ---------------------------------------------------------------------------
// Elementwise binaries (exact shape match; no broadcasting)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(same_shape(a, b), "add: " << shape_str(a.shape()) << " vs " << shape_str(b.shape()));
  Tensor<T> y(a.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  require_finite(y, "add");
  if (detail::recording(tape, a, b)) {
    tape->mark(y);
    const bool ta = tape->tracks(a), tb = tape->tracks(b);
    tape->push([a, b, y, ta, tb]() mutable {
      const T* gy = y.grad();
      if (ta) {
        T* ga = a.grad();
        for (int64_t i = 0; i < y.size(); ++i) ga[i] += gy[i];
      }
      if (tb) {
        T* gb = b.grad();
        for (int64_t i = 0; i < y.size(); ++i) gb[i] += gy[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(same_shape(a, b), "sub: " << shape_str(a.shape()) << " vs " << shape_str(b.shape()));
  Tensor<T> y(a.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  require_finite(y, "sub");
  if (detail::recording(tape, a, b)) {
    tape->mark(y);
    const bool ta = tape->tracks(a), tb = tape->tracks(b);
    tape->push([a, b, y, ta, tb]() mutable {
      const T* gy = y.grad();
      if (ta) {
        T* ga = a.grad();
        for (int64_t i = 0; i < y.size(); ++i) ga[i] += gy[i];
      }
      if (tb) {
        T* gb = b.grad();
        for (int64_t i = 0; i < y.size(); ++i) gb[i] -= gy[i];
      }
    });
  }
  return y;
}

/// Hadamard product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(same_shape(a, b), "mul: " << shape_str(a.shape()) << " vs " << shape_str(b.shape()));
  Tensor<T> y(a.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  require_finite(y, "mul");
  if (detail::recording(tape, a, b)) {
    tape->mark(y);
    const bool ta = tape->tracks(a), tb = tape->tracks(b);
    tape->push([a, b, y, ta, tb]() mutable {
      const T* gy = y.grad();
      if (ta) {
        T* ga = a.grad();
        for (int64_t i = 0; i < y.size(); ++i) ga[i] += gy[i] * b[i];
      }
      if (tb) {
        T* gb = b.grad();
        for (int64_t i = 0; i < y.size(); ++i) gb[i] += gy[i] * a[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T alpha, Tape<std::type_identity_t<T>>* tape = nullptr) {
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = alpha * x[i];
  require_finite(y, "scale");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, alpha]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t i = 0; i < y.size(); ++i) gx[i] += alpha * gy[i];
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Elementwise unaries
// ---------------------------------------------------------------------------

enum class Act { Sigmoid, Relu, Tanh, Log };

template <typename T>
Tensor<T> elementwise(Act kind, const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  Tensor<T> y(x.shape());
  switch (kind) {
    case Act::Sigmoid:
      for (int64_t i = 0; i < y.size(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
      break;
    case Act::Relu:
      for (int64_t i = 0; i < y.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Act::Tanh:
      for (int64_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    case Act::Log:
      for (int64_t i = 0; i < y.size(); ++i) y[i] = std::log(x[i]);
      break;
  }
  require_finite(y, "elementwise");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, kind]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      switch (kind) {
        case Act::Sigmoid:
          for (int64_t i = 0; i < y.size(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
          break;
        case Act::Relu:
          for (int64_t i = 0; i < y.size(); ++i) gx[i] += x[i] > T(0) ? gy[i] : T(0);
          break;
        case Act::Tanh:
          for (int64_t i = 0; i < y.size(); ++i) gx[i] += gy[i] * (T(1) - y[i] * y[i]);
          break;
        case Act::Log:
          for (int64_t i = 0; i < y.size(); ++i) gx[i] += gy[i] / x[i];
          break;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  return elementwise(Act::Sigmoid, x, tape);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  return elementwise(Act::Relu, x, tape);
}
template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  return elementwise(Act::Tanh, x, tape);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

/// Softmax along `axis`, max-shifted for stability. Output sums to 1 along
/// the axis and is invariant to adding a constant to the input.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(axis >= 0 && axis < x.ndim(),
            "softmax axis " << axis << " invalid for " << shape_str(x.shape()));
  const int64_t lanes = x.dim(axis);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);

  Tensor<T> y(x.shape());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * lanes * inner + in;
      T m = x[base];
      for (int64_t l = 1; l < lanes; ++l) m = std::max(m, x[base + l * inner]);
      T sum = T(0);
      for (int64_t l = 0; l < lanes; ++l) {
        const T e = std::exp(x[base + l * inner] - m);
        y[base + l * inner] = e;
        sum += e;
      }
      for (int64_t l = 0; l < lanes; ++l) y[base + l * inner] /= sum;
    }
  }
  require_finite(y, "softmax");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, outer, lanes, inner]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * lanes * inner + in;
          T dot = T(0);
          for (int64_t l = 0; l < lanes; ++l) dot += gy[base + l * inner] * y[base + l * inner];
          for (int64_t l = 0; l < lanes; ++l) {
            const int64_t i = base + l * inner;
            gx[i] += y[i] * (gy[i] - dot);
          }
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Shape and layout ops (NCHW)
// ---------------------------------------------------------------------------

/// Zero padding, possibly asymmetric.
template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int top, int left, int bottom, int right,
                Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4, "pad2d expects NCHW, got " << shape_str(x.shape()));
  A2U_CHECK(top >= 0 && left >= 0 && bottom >= 0 && right >= 0, "negative padding");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, h + top + bottom, w + left + right});
  for (int64_t i = 0; i < n * c; ++i) {
    const T* src = x.data() + i * h * w;
    T* dst = y.data() + i * y.dim(2) * y.dim(3);
    for (int64_t r = 0; r < h; ++r) {
      std::copy(src + r * w, src + (r + 1) * w, dst + (r + top) * y.dim(3) + left);
    }
  }
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, top, left, h, w]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      const int64_t wy = y.dim(3);
      for (int64_t i = 0; i < x.dim(0) * x.dim(1); ++i) {
        const T* gsrc = gy + i * y.dim(2) * wy;
        T* gdst = gx + i * h * w;
        for (int64_t r = 0; r < h; ++r) {
          for (int64_t cc = 0; cc < w; ++cc) gdst[r * w + cc] += gsrc[(r + top) * wy + left + cc];
        }
      }
    });
  }
  return y;
}

/// Channel mean over the spatial extent: [N,C,H,W] -> [N,C,1,1].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4, "global_avg_pool expects NCHW, got " << shape_str(x.shape()));
  const int64_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({x.dim(0), x.dim(1), 1, 1});
  for (int64_t i = 0; i < nc; ++i) {
    T acc = T(0);
    const T* p = x.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) acc += p[j];
    y[i] = acc / static_cast<T>(hw);
  }
  require_finite(y, "global_avg_pool");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, nc, hw]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t i = 0; i < nc; ++i) {
        const T g = gy[i] / static_cast<T>(hw);
        T* p = gx + i * hw;
        for (int64_t j = 0; j < hw; ++j) p[j] += g;
      }
    });
  }
  return y;
}

/// y = x * w^T for x [N,K], w [M,K]; no bias.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 2 && w.ndim() == 2 && x.dim(1) == w.dim(1),
            "linear: " << shape_str(x.shape()) << " x " << shape_str(w.shape()));
  const int64_t n = x.dim(0), k = x.dim(1), m = w.dim(0);
  Tensor<T> y({n, m});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < m; ++j) {
      T acc = T(0);
      for (int64_t l = 0; l < k; ++l) acc += x[i * k + l] * w[j * k + l];
      y[i * m + j] = acc;
    }
  }
  require_finite(y, "linear");
  if (detail::recording(tape, x, w)) {
    tape->mark(y);
    const bool tx = tape->tracks(x), tw = tape->tracks(w);
    tape->push([x, w, y, n, k, m, tx, tw]() mutable {
      const T* gy = y.grad();
      if (tx) {
        T* gx = x.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < m; ++j)
            for (int64_t l = 0; l < k; ++l) gx[i * k + l] += gy[i * m + j] * w[j * k + l];
      }
      if (tw) {
        T* gw = w.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < m; ++j)
            for (int64_t l = 0; l < k; ++l) gw[j * k + l] += gy[i * m + j] * x[i * k + l];
      }
    });
  }
  return y;
}

/// [N, C*r*r, H, W] -> [N, C, rH, rW] with
/// out(c, r*i+di, r*j+dj) = in(c*r*r + di*r + dj, i, j).
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4, "pixel_shuffle expects NCHW");
  A2U_CHECK(r >= 1, "pixel_shuffle ratio must be >= 1");
  A2U_CHECK(x.dim(1) % (r * r) == 0,
            "pixel_shuffle: channels " << x.dim(1) << " not divisible by r^2=" << r * r);
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t cout = cin / (r * r);
  Tensor<T> y({n, cout, h * r, w * r});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t c = 0; c < cout; ++c)
      for (int64_t di = 0; di < r; ++di)
        for (int64_t dj = 0; dj < r; ++dj) {
          const int64_t src_c = c * r * r + di * r + dj;
          for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < w; ++j)
              y.at4(b, c, r * i + di, r * j + dj) = x.at4(b, src_c, i, j);
        }
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, r, n, cout, h, w]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t c = 0; c < cout; ++c)
          for (int64_t di = 0; di < r; ++di)
            for (int64_t dj = 0; dj < r; ++dj) {
              const int64_t src_c = c * r * r + di * r + dj;
              for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w; ++j)
                  gx[x.offset4(b, src_c, i, j)] += gy[y.offset4(b, c, r * i + di, r * j + dj)];
            }
    });
  }
  return y;
}

/// Inverse of pixel_shuffle: [N, C, rH, rW] -> [N, C*r*r, H, W].
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4, "pixel_unshuffle expects NCHW");
  A2U_CHECK(r >= 1 && x.dim(2) % r == 0 && x.dim(3) % r == 0,
            "pixel_unshuffle: spatial dims not divisible by r=" << r);
  const int64_t n = x.dim(0), c = x.dim(1), ho = x.dim(2) / r, wo = x.dim(3) / r;
  Tensor<T> y({n, c * r * r, ho, wo});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t di = 0; di < r; ++di)
        for (int64_t dj = 0; dj < r; ++dj) {
          const int64_t dst_c = cc * r * r + di * r + dj;
          for (int64_t i = 0; i < ho; ++i)
            for (int64_t j = 0; j < wo; ++j)
              y.at4(b, dst_c, i, j) = x.at4(b, cc, r * i + di, r * j + dj);
        }
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, r, n, c, ho, wo]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t di = 0; di < r; ++di)
            for (int64_t dj = 0; dj < r; ++dj) {
              const int64_t dst_c = cc * r * r + di * r + dj;
              for (int64_t i = 0; i < ho; ++i)
                for (int64_t j = 0; j < wo; ++j)
                  gx[x.offset4(b, cc, r * i + di, r * j + dj)] += gy[y.offset4(b, dst_c, i, j)];
            }
    });
  }
  return y;
}

/// Copy of rows [begin, begin+count) along dim 0.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, int64_t begin, int64_t count, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() >= 1 && begin >= 0 && count >= 1 && begin + count <= x.dim(0),
            "slice_rows [" << begin << "," << begin + count << ") out of " << shape_str(x.shape()));
  Shape shape = x.shape();
  shape[0] = count;
  const int64_t row = x.size() / x.dim(0);
  Tensor<T> y(shape);
  std::copy(x.data() + begin * row, x.data() + (begin + count) * row, y.data());
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, begin, row]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t i = 0; i < y.size(); ++i) gx[begin * row + i] += gy[i];
    });
  }
  return y;
}

/// Copy of channels [begin, begin+count) along dim 1 of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int64_t begin, int64_t count,
                         Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && begin >= 0 && count >= 1 && begin + count <= x.dim(1),
            "slice_channels [" << begin << "," << begin + count << ") out of "
                               << shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({n, count, x.dim(2), x.dim(3)});
  for (int64_t b = 0; b < n; ++b)
    std::copy(x.data() + (b * c + begin) * hw, x.data() + (b * c + begin + count) * hw,
              y.data() + b * count * hw);
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, begin, n, c, hw]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      const int64_t count = y.dim(1);
      for (int64_t b = 0; b < n; ++b)
        for (int64_t j = 0; j < count * hw; ++j)
          gx[(b * c + begin) * hw + j] += gy[b * count * hw + j];
    });
  }
  return y;
}

/// Tiles dim 0 `times` times (for channel-shared kernels applied per channel).
template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& x, int64_t times, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() >= 1 && times >= 1, "repeat_rows times=" << times);
  Shape shape = x.shape();
  shape[0] *= times;
  Tensor<T> y(shape);
  for (int64_t t = 0; t < times; ++t)
    std::copy(x.data(), x.data() + x.size(), y.data() + t * x.size());
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, times]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t t = 0; t < times; ++t)
        for (int64_t i = 0; i < x.size(); ++i) gx[i] += gy[t * x.size() + i];
    });
  }
  return y;
}

/// Concatenation along the channel axis (dim 1) of NCHW tensors.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(!parts.empty(), "concat_channels of nothing");
  const auto& first = parts.front();
  A2U_CHECK(first.ndim() == 4, "concat_channels expects NCHW");
  int64_t ctotal = 0;
  for (const auto& p : parts) {
    A2U_CHECK(p.ndim() == 4 && p.dim(0) == first.dim(0) && p.dim(2) == first.dim(2) &&
                  p.dim(3) == first.dim(3),
              "concat_channels shape mismatch");
    ctotal += p.dim(1);
  }
  const int64_t n = first.dim(0), hw = first.dim(2) * first.dim(3);
  Tensor<T> y({n, ctotal, first.dim(2), first.dim(3)});
  int64_t coff = 0;
  for (const auto& p : parts) {
    for (int64_t b = 0; b < n; ++b) {
      std::copy(p.data() + b * p.dim(1) * hw, p.data() + (b + 1) * p.dim(1) * hw,
                y.data() + (b * ctotal + coff) * hw);
    }
    coff += p.dim(1);
  }
  bool any = false;
  if (tape) {
    for (const auto& p : parts) any = any || tape->tracks(p);
  }
  if (any) {
    std::vector<char> tracked(parts.size());
    for (size_t i = 0; i < parts.size(); ++i) tracked[i] = tape->tracks(parts[i]) ? 1 : 0;
    tape->mark(y);
    auto saved = parts;
    tape->push([saved, tracked, y, n, hw, ctotal]() mutable {
      const T* gy = y.grad();
      int64_t coff = 0;
      for (size_t i = 0; i < saved.size(); ++i) {
        auto& p = saved[i];
        if (tracked[i]) {
          T* gp = p.grad();
          for (int64_t b = 0; b < n; ++b)
            for (int64_t j = 0; j < p.dim(1) * hw; ++j)
              gp[b * p.dim(1) * hw + j] += gy[(b * ctotal + coff) * hw + j];
        }
        coff += p.dim(1);
      }
    });
  }
  return y;
}

/// Reorders channels: out channel i = in channel perm[i].
template <typename T>
Tensor<T> permute_channels(const Tensor<T>& x, const std::vector<int64_t>& perm,
                           Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && static_cast<int64_t>(perm.size()) == x.dim(1),
            "permute_channels: perm size " << perm.size() << " vs " << shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y(x.shape());
  for (int64_t b = 0; b < n; ++b)
    for (int64_t i = 0; i < c; ++i) {
      A2U_CHECK(perm[i] >= 0 && perm[i] < c, "permute_channels: bad index " << perm[i]);
      std::copy(x.data() + (b * c + perm[i]) * hw, x.data() + (b * c + perm[i] + 1) * hw,
                y.data() + (b * c + i) * hw);
    }
  if (detail::recording(tape, x)) {
    tape->mark(y);
    auto p = perm;
    tape->push([x, y, p, n, c, hw]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < c; ++i)
          for (int64_t j = 0; j < hw; ++j)
            gx[(b * c + p[i]) * hw + j] += gy[(b * c + i) * hw + j];
    });
  }
  return y;
}

/// x[:, :, ::r, ::r]; the spatial dims must divide evenly.
template <typename T>
Tensor<T> stride_slice(const Tensor<T>& x, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && r >= 1 && x.dim(2) % r == 0 && x.dim(3) % r == 0,
            "stride_slice r=" << r << " on " << shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), ho = x.dim(2) / r, wo = x.dim(3) / r;
  Tensor<T> y({n, c, ho, wo});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < ho; ++i)
        for (int64_t j = 0; j < wo; ++j) y.at4(b, cc, i, j) = x.at4(b, cc, i * r, j * r);
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, r, n, c, ho, wo]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < ho; ++i)
            for (int64_t j = 0; j < wo; ++j)
              gx[x.offset4(b, cc, i * r, j * r)] += gy[y.offset4(b, cc, i, j)];
    });
  }
  return y;
}

/// Sums channels down to one: [N,C,H,W] -> [N,1,H,W].
template <typename T>
Tensor<T> channel_sum(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4, "channel_sum expects NCHW");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({n, 1, x.dim(2), x.dim(3)});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t j = 0; j < hw; ++j) y[b * hw + j] += x[(b * c + cc) * hw + j];
  require_finite(y, "channel_sum");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, n, c, hw]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t j = 0; j < hw; ++j) gx[(b * c + cc) * hw + j] += gy[b * hw + j];
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Per-sample weighted ops (dynamic kernel generation)
// ---------------------------------------------------------------------------

/// Scales each channel of each sample: y[n,c,:,:] = x[n,c,:,:] * s[n, c or 0].
/// s has shape [N, C] (channel-wise) or [N, 1] (shared across channels).
template <typename T>
Tensor<T> depthwise_scale_per_sample(const Tensor<T>& x, const Tensor<T>& s,
                                     Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && s.ndim() == 2 && s.dim(0) == x.dim(0) &&
                (s.dim(1) == x.dim(1) || s.dim(1) == 1),
            "depthwise_scale_per_sample: " << shape_str(x.shape()) << " vs "
                                           << shape_str(s.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const bool shared = s.dim(1) == 1;
  Tensor<T> y(x.shape());
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc) {
      const T f = s[b * s.dim(1) + (shared ? 0 : cc)];
      for (int64_t j = 0; j < hw; ++j) y[(b * c + cc) * hw + j] = f * x[(b * c + cc) * hw + j];
    }
  require_finite(y, "depthwise_scale_per_sample");
  if (detail::recording(tape, x, s)) {
    tape->mark(y);
    const bool tx = tape->tracks(x), ts = tape->tracks(s);
    tape->push([x, s, y, n, c, hw, shared, tx, ts]() mutable {
      const T* gy = y.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc) {
          const int64_t off = (b * c + cc) * hw;
          const T f = s[b * s.dim(1) + (shared ? 0 : cc)];
          if (tx) {
            T* gx = x.grad();
            for (int64_t j = 0; j < hw; ++j) gx[off + j] += f * gy[off + j];
          }
          if (ts) {
            T* gs = s.grad();
            T acc = T(0);
            for (int64_t j = 0; j < hw; ++j) acc += gy[off + j] * x[off + j];
            gs[b * s.dim(1) + (shared ? 0 : cc)] += acc;
          }
        }
    });
  }
  return y;
}

/// 1x1 convolution with a distinct weight matrix per sample:
/// y[n,o,:,:] = sum_i w[n,o,i] * x[n,i,:,:], w shaped [N, O, I].
template <typename T>
Tensor<T> pointwise_conv_per_sample(const Tensor<T>& x, const Tensor<T>& w,
                                    Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && w.ndim() == 3 && w.dim(0) == x.dim(0) && w.dim(2) == x.dim(1),
            "pointwise_conv_per_sample: " << shape_str(x.shape()) << " vs "
                                          << shape_str(w.shape()));
  const int64_t n = x.dim(0), ci = x.dim(1), co = w.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({n, co, x.dim(2), x.dim(3)});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t o = 0; o < co; ++o) {
      T* dst = y.data() + (b * co + o) * hw;
      for (int64_t i = 0; i < ci; ++i) {
        const T f = w[(b * co + o) * ci + i];
        const T* src = x.data() + (b * ci + i) * hw;
        for (int64_t j = 0; j < hw; ++j) dst[j] += f * src[j];
      }
    }
  require_finite(y, "pointwise_conv_per_sample");
  if (detail::recording(tape, x, w)) {
    tape->mark(y);
    const bool tx = tape->tracks(x), tw = tape->tracks(w);
    tape->push([x, w, y, n, ci, co, hw, tx, tw]() mutable {
      const T* gy = y.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t o = 0; o < co; ++o) {
          const T* gdst = gy + (b * co + o) * hw;
          for (int64_t i = 0; i < ci; ++i) {
            const int64_t woff = (b * co + o) * ci + i;
            const int64_t xoff = (b * ci + i) * hw;
            if (tx) {
              T* gx = x.grad();
              const T f = w[woff];
              for (int64_t j = 0; j < hw; ++j) gx[xoff + j] += f * gdst[j];
            }
            if (tw) {
              T* gw = w.grad();
              T acc = T(0);
              for (int64_t j = 0; j < hw; ++j) acc += gdst[j] * x[xoff + j];
              gw[woff] += acc;
            }
          }
        }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Max pooling 2x2 with indices
// ---------------------------------------------------------------------------

/// Flat 0..3 position of each window maximum; ties go to the smallest index.
struct PoolIndices {
  Shape shape;  // [N, C, H/2, W/2]
  std::vector<uint8_t> idx;
};

template <typename T>
struct PoolResult {
  Tensor<T> output;
  PoolIndices indices;
};

template <typename T>
PoolResult<T> max_pool_2x2(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && x.dim(2) % 2 == 0 && x.dim(3) % 2 == 0,
            "max_pool_2x2 needs even spatial dims, got " << shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), ho = x.dim(2) / 2, wo = x.dim(3) / 2;
  PoolResult<T> res{Tensor<T>({n, c, ho, wo}), PoolIndices{{n, c, ho, wo}, {}}};
  res.indices.idx.resize(n * c * ho * wo);
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < ho; ++i)
        for (int64_t j = 0; j < wo; ++j) {
          T best = x.at4(b, cc, 2 * i, 2 * j);
          uint8_t arg = 0;
          for (uint8_t k = 1; k < 4; ++k) {
            const T v = x.at4(b, cc, 2 * i + k / 2, 2 * j + k % 2);
            if (v > best) {
              best = v;
              arg = k;
            }
          }
          res.output.at4(b, cc, i, j) = best;
          res.indices.idx[res.output.offset4(b, cc, i, j)] = arg;
        }
  if (detail::recording(tape, x)) {
    tape->mark(res.output);
    Tensor<T> y = res.output;
    auto idx = res.indices.idx;
    tape->push([x, y, idx, n, c, ho, wo]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < ho; ++i)
            for (int64_t j = 0; j < wo; ++j) {
              const uint8_t k = idx[y.offset4(b, cc, i, j)];
              gx[x.offset4(b, cc, 2 * i + k / 2, 2 * j + k % 2)] += gy[y.offset4(b, cc, i, j)];
            }
    });
  }
  return res;
}

/// Places each pooled value at its recorded argmax position, zeros elsewhere.
template <typename T>
Tensor<T> max_unpool_2x2(const Tensor<T>& pooled, const PoolIndices& indices,
                         Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(pooled.ndim() == 4 && pooled.shape() == indices.shape,
            "max_unpool_2x2: pooled " << shape_str(pooled.shape()) << " vs indices "
                                      << shape_str(indices.shape));
  const int64_t n = pooled.dim(0), c = pooled.dim(1), h = pooled.dim(2), w = pooled.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
          const uint8_t k = indices.idx[pooled.offset4(b, cc, i, j)];
          A2U_CHECK(k < 4, "max_unpool_2x2: index " << int(k) << " out of window");
          y.at4(b, cc, 2 * i + k / 2, 2 * j + k % 2) = pooled.at4(b, cc, i, j);
        }
  if (detail::recording(tape, pooled)) {
    tape->mark(y);
    auto idx = indices.idx;
    tape->push([pooled, y, idx, n, c, h, w]() mutable {
      const T* gy = y.grad();
      T* gp = pooled.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < w; ++j) {
              const uint8_t k = idx[pooled.offset4(b, cc, i, j)];
              gp[pooled.offset4(b, cc, i, j)] += gy[y.offset4(b, cc, 2 * i + k / 2, 2 * j + k % 2)];
            }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Unfold / fold
// ---------------------------------------------------------------------------

namespace detail {

inline int64_t conv_out_size(int64_t in, int k, int stride, int pad, const char* what) {
  const int64_t span = in + 2 * pad - k;
  A2U_CHECK(span >= 0, what << ": window " << k << " larger than padded input " << in + 2 * pad);
  A2U_CHECK(span % stride == 0,
            what << ": non-integer output size for in=" << in << " k=" << k << " stride=" << stride
                 << " pad=" << pad);
  return span / stride + 1;
}

}  // namespace detail

/// im2col: column j holds the zero-padded k x k window of every channel at
/// sliding position j, row-major within the window. Output [N, C*k*k, L].
template <typename T>
Tensor<T> unfold(const Tensor<T>& x, int k, int stride, int pad, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && k >= 1 && stride >= 1 && pad >= 0,
            "unfold(k=" << k << ", stride=" << stride << ", pad=" << pad << ")");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t ho = detail::conv_out_size(h, k, stride, pad, "unfold");
  const int64_t wo = detail::conv_out_size(w, k, stride, pad, "unfold");
  const int64_t rows = c * k * k, l = ho * wo;
  Tensor<T> y({n, rows, l});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t a = 0; a < k; ++a)
        for (int64_t bb = 0; bb < k; ++bb) {
          const int64_t row = (cc * k + a) * k + bb;
          T* dst = y.data() + (b * rows + row) * l;
          for (int64_t i = 0; i < ho; ++i) {
            const int64_t src_i = i * stride + a - pad;
            for (int64_t j = 0; j < wo; ++j) {
              const int64_t src_j = j * stride + bb - pad;
              dst[i * wo + j] = (src_i >= 0 && src_i < h && src_j >= 0 && src_j < w)
                                    ? x.at4(b, cc, src_i, src_j)
                                    : T(0);
            }
          }
        }
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, k, stride, pad, n, c, h, w, ho, wo, rows, l]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t a = 0; a < k; ++a)
            for (int64_t bb = 0; bb < k; ++bb) {
              const int64_t row = (cc * k + a) * k + bb;
              const T* src = gy + (b * rows + row) * l;
              for (int64_t i = 0; i < ho; ++i) {
                const int64_t dst_i = i * stride + a - pad;
                if (dst_i < 0 || dst_i >= h) continue;
                for (int64_t j = 0; j < wo; ++j) {
                  const int64_t dst_j = j * stride + bb - pad;
                  if (dst_j >= 0 && dst_j < w) gx[x.offset4(b, cc, dst_i, dst_j)] += src[i * wo + j];
                }
              }
            }
    });
  }
  return y;
}

/// Adjoint of unfold: scatters columns back, summing overlaps.
template <typename T>
Tensor<T> fold(const Tensor<T>& cols, int64_t c, int64_t h, int64_t w, int k, int stride, int pad,
               Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(cols.ndim() == 3 && cols.dim(1) == c * k * k, "fold: bad column layout");
  const int64_t n = cols.dim(0);
  const int64_t ho = detail::conv_out_size(h, k, stride, pad, "fold");
  const int64_t wo = detail::conv_out_size(w, k, stride, pad, "fold");
  A2U_CHECK(cols.dim(2) == ho * wo, "fold: column count " << cols.dim(2) << " vs " << ho * wo);
  const int64_t rows = c * k * k, l = ho * wo;
  Tensor<T> y({n, c, h, w});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t a = 0; a < k; ++a)
        for (int64_t bb = 0; bb < k; ++bb) {
          const int64_t row = (cc * k + a) * k + bb;
          const T* src = cols.data() + (b * rows + row) * l;
          for (int64_t i = 0; i < ho; ++i) {
            const int64_t dst_i = i * stride + a - pad;
            if (dst_i < 0 || dst_i >= h) continue;
            for (int64_t j = 0; j < wo; ++j) {
              const int64_t dst_j = j * stride + bb - pad;
              if (dst_j >= 0 && dst_j < w) y.at4(b, cc, dst_i, dst_j) += src[i * wo + j];
            }
          }
        }
  if (detail::recording(tape, cols)) {
    tape->mark(y);
    tape->push([cols, y, k, stride, pad, n, c, h, w, ho, wo, rows, l]() mutable {
      const T* gy = y.grad();
      T* gc = cols.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t a = 0; a < k; ++a)
            for (int64_t bb = 0; bb < k; ++bb) {
              const int64_t row = (cc * k + a) * k + bb;
              T* dst = gc + (b * rows + row) * l;
              for (int64_t i = 0; i < ho; ++i) {
                const int64_t src_i = i * stride + a - pad;
                if (src_i < 0 || src_i >= h) continue;
                for (int64_t j = 0; j < wo; ++j) {
                  const int64_t src_j = j * stride + bb - pad;
                  if (src_j >= 0 && src_j < w) dst[i * wo + j] += gy[y.offset4(b, cc, src_i, src_j)];
                }
              }
            }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  Tensor<T> y({1});
  T acc = T(0);
  for (int64_t i = 0; i < x.size(); ++i) acc += x[i];
  y[0] = acc;
  require_finite(y, "sum_all");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y]() mutable {
      const T g = y.grad()[0];
      T* gx = x.grad();
      for (int64_t i = 0; i < x.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x, Tape<std::type_identity_t<T>>* tape = nullptr) {
  Tensor<T> y({1});
  T acc = T(0);
  for (int64_t i = 0; i < x.size(); ++i) acc += x[i];
  y[0] = acc / static_cast<T>(x.size());
  require_finite(y, "mean_all");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y]() mutable {
      const T g = y.grad()[0] / static_cast<T>(x.size());
      T* gx = x.grad();
      for (int64_t i = 0; i < x.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

/// Mean absolute error; the subgradient at zero is taken as zero.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(same_shape(pred, target), "l1_loss shape mismatch");
  Tensor<T> y({1});
  T acc = T(0);
  for (int64_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - target[i]);
  y[0] = acc / static_cast<T>(pred.size());
  require_finite(y, "l1_loss");
  if (detail::recording(tape, pred, target)) {
    tape->mark(y);
    const bool tp = tape->tracks(pred), tt = tape->tracks(target);
    tape->push([pred, target, y, tp, tt]() mutable {
      const T g = y.grad()[0] / static_cast<T>(pred.size());
      for (int64_t i = 0; i < pred.size(); ++i) {
        const T d = pred[i] - target[i];
        const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
        if (tp) pred.grad()[i] += s;
        if (tt) target.grad()[i] -= s;
      }
    });
  }
  return y;
}

}  // namespace a2u

#endif  // A2U_OPS_HPP_
