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

#ifndef A2U_KERNEL_MAP_HPP_
#define A2U_KERNEL_MAP_HPP_

#include <type_traits>
#include "a2u/ops.hpp"
#include "a2u/tape.hpp"
#include "a2u/tensor.hpp"

namespace a2u {

enum class KernelDir { Up, Down };

/// One s x s kernel per output position, row-major within the window and
/// shared across channels. For direction Up the kernels live at the
/// high-resolution grid; for Down they live at the low-resolution grid and
/// each covers an s x s window of the high-resolution source.
template <typename T>
struct KernelMap {
  Tensor<T> kernels;  // [N, s*s, H', W']
  int s = 1;
  int r = 1;
  KernelDir direction = KernelDir::Up;
  bool normalized = false;

  void validate() const {
    A2U_CHECK(kernels.ndim() == 4 && kernels.dim(1) == int64_t(s) * s,
              "kernel map " << shape_str(kernels.shape()) << " vs s=" << s);
    A2U_CHECK(s >= 1 && r >= 1, "kernel map with s=" << s << " r=" << r);
  }
};

/// g(w, z) = w^T z at every output position. Up: the window of the source is
/// centered at (floor(i'/r), floor(j'/r)), zero-padded at borders, with the
/// extra row/column of even windows extending toward bottom-right. Down: the
/// window top-left corner sits at r*i - (s - r)/2, which requires s - r even.
template <typename T>
Tensor<T> apply_kernel_map(const Tensor<T>& source, const KernelMap<T>& kmap,
                           Tape<std::type_identity_t<T>>* tape = nullptr) {
  kmap.validate();
  A2U_CHECK(source.ndim() == 4, "apply_kernel_map expects NCHW source");
  const Tensor<T>& k = kmap.kernels;
  A2U_CHECK(source.dim(0) == k.dim(0), "apply_kernel_map batch mismatch");
  const int64_t n = source.dim(0), c = source.dim(1), hs = source.dim(2), ws = source.dim(3);
  const int64_t ho = k.dim(2), wo = k.dim(3);
  const int s = kmap.s, r = kmap.r;

  int64_t lo_i;  // subtracted from the window anchor to reach the top-left
  if (kmap.direction == KernelDir::Up) {
    A2U_CHECK(ho == r * hs && wo == r * ws,
              "up kernel map " << shape_str(k.shape()) << " vs source " << shape_str(source.shape())
                               << " at r=" << r);
    lo_i = (s - 1) / 2;
  } else {
    A2U_CHECK(hs == r * ho && ws == r * wo,
              "down kernel map " << shape_str(k.shape()) << " vs source "
                                 << shape_str(source.shape()) << " at r=" << r);
    A2U_CHECK((s - r) % 2 == 0, "down kernel side " << s << " minus ratio " << r << " must be even");
    lo_i = (s - r) / 2;
  }
  const bool up = kmap.direction == KernelDir::Up;

  Tensor<T> y({n, c, ho, wo});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < ho; ++i)
        for (int64_t j = 0; j < wo; ++j) {
          const int64_t ai = up ? i / r - lo_i : r * i - lo_i;
          const int64_t aj = up ? j / r - lo_i : r * j - lo_i;
          T acc = T(0);
          for (int a = 0; a < s; ++a) {
            const int64_t si = ai + a;
            if (si < 0 || si >= hs) continue;
            for (int bb = 0; bb < s; ++bb) {
              const int64_t sj = aj + bb;
              if (sj < 0 || sj >= ws) continue;
              acc += k.at4(b, a * s + bb, i, j) * source.at4(b, cc, si, sj);
            }
          }
          y.at4(b, cc, i, j) = acc;
        }
  require_finite(y, "apply_kernel_map");

  if (tape && (tape->tracks(source) || tape->tracks(k))) {
    tape->mark(y);
    const bool tsrc = tape->tracks(source), tk = tape->tracks(k);
    Tensor<T> kt = k;
    tape->push([source, kt, y, up, r, s, lo_i, n, c, hs, ws, ho, wo, tsrc, tk]() mutable {
      const T* gy = y.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < ho; ++i)
          for (int64_t j = 0; j < wo; ++j) {
            const int64_t ai = up ? i / r - lo_i : r * i - lo_i;
            const int64_t aj = up ? j / r - lo_i : r * j - lo_i;
            for (int a = 0; a < s; ++a) {
              const int64_t si = ai + a;
              if (si < 0 || si >= hs) continue;
              for (int bb = 0; bb < s; ++bb) {
                const int64_t sj = aj + bb;
                if (sj < 0 || sj >= ws) continue;
                const int64_t ke = kt.offset4(b, a * s + bb, i, j);
                for (int64_t cc = 0; cc < c; ++cc) {
                  const T g = gy[y.offset4(b, cc, i, j)];
                  if (tsrc) source.grad()[source.offset4(b, cc, si, sj)] += g * kt[ke];
                  if (tk) kt.grad()[ke] += g * source.at4(b, cc, si, sj);
                }
              }
            }
          }
    });
  }
  return y;
}

}  // namespace a2u

#endif  // A2U_KERNEL_MAP_HPP_
