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

#ifndef A2U_CONV_HPP_
#define A2U_CONV_HPP_

#include <Eigen/Core>

#include <type_traits>

#include "a2u/ops.hpp"
#include "a2u/tape.hpp"
#include "a2u/tensor.hpp"

namespace a2u {

struct ConvSpec {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int pad = 0;
  int groups = 1;
  bool has_bias = false;

  void validate() const {
    A2U_CHECK(out_channels > 0 && in_channels > 0 && kernel_h > 0 && kernel_w > 0,
              "conv spec with non-positive dims");
    A2U_CHECK(stride >= 1, "conv stride must be >= 1, got " << stride);
    A2U_CHECK(pad >= 0, "conv padding must be >= 0, got " << pad);
    A2U_CHECK(groups >= 1 && in_channels % groups == 0 && out_channels % groups == 0,
              "conv channels (" << in_channels << "," << out_channels
                                << ") not divisible by groups=" << groups);
  }

  Shape weight_shape() const {
    return {out_channels, in_channels / groups, kernel_h, kernel_w};
  }
};

namespace detail {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Writes one sample into a column block of a [C*k*k, ld] matrix at column
/// offset col0 (Caffe-style im2col, square kernel).
template <typename T>
void im2col_block(const T* x, int64_t c, int64_t h, int64_t w, int kh, int kw, int stride, int pad,
                  int64_t ho, int64_t wo, T* col, int64_t ld, int64_t col0) {
  for (int64_t cc = 0; cc < c; ++cc) {
    const T* plane = x + cc * h * w;
    for (int a = 0; a < kh; ++a) {
      for (int b = 0; b < kw; ++b) {
        T* dst = col + ((cc * kh + a) * kw + b) * ld + col0;
        for (int64_t i = 0; i < ho; ++i) {
          const int64_t si = i * stride + a - pad;
          if (si < 0 || si >= h) {
            std::fill(dst + i * wo, dst + (i + 1) * wo, T(0));
            continue;
          }
          for (int64_t j = 0; j < wo; ++j) {
            const int64_t sj = j * stride + b - pad;
            dst[i * wo + j] = (sj >= 0 && sj < w) ? plane[si * w + sj] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col_block: adds the column block back into the image.
template <typename T>
void col2im_block(const T* col, int64_t ld, int64_t col0, int64_t c, int64_t h, int64_t w, int kh,
                  int kw, int stride, int pad, int64_t ho, int64_t wo, T* x) {
  for (int64_t cc = 0; cc < c; ++cc) {
    T* plane = x + cc * h * w;
    for (int a = 0; a < kh; ++a) {
      for (int b = 0; b < kw; ++b) {
        const T* src = col + ((cc * kh + a) * kw + b) * ld + col0;
        for (int64_t i = 0; i < ho; ++i) {
          const int64_t di = i * stride + a - pad;
          if (di < 0 || di >= h) continue;
          for (int64_t j = 0; j < wo; ++j) {
            const int64_t dj = j * stride + b - pad;
            if (dj >= 0 && dj < w) plane[di * w + dj] += src[i * wo + j];
          }
        }
      }
    }
  }
}

inline int64_t conv_chunk_samples(int64_t n, int64_t rows, int64_t l) {
  const int64_t budget = int64_t(8) * 1024 * 1024;  // elements per scratch matrix
  return std::clamp<int64_t>(budget / std::max<int64_t>(rows * l, 1), 1, n);
}

}  // namespace detail

/// 2-D convolution over NCHW input. Output size (H + 2p - kh)/stride + 1 must
/// divide exactly; the caller picks the padding. Grouped convolution splits
/// channels the usual way (groups == in_channels gives the depthwise case).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& w,
                 const Tensor<std::type_identity_t<T>>* bias = nullptr,
                 Tape<std::type_identity_t<T>>* tape = nullptr) {
  spec.validate();
  A2U_CHECK(x.ndim() == 4 && x.dim(1) == spec.in_channels,
            "conv2d input " << shape_str(x.shape()) << " vs in_channels=" << spec.in_channels);
  A2U_CHECK(w.shape() == spec.weight_shape(), "conv2d weights " << shape_str(w.shape()) << " vs "
                                                                << shape_str(spec.weight_shape()));
  A2U_CHECK(spec.has_bias == (bias != nullptr), "conv2d bias presence mismatch with spec");
  if (bias) {
    A2U_CHECK(bias->ndim() == 1 && bias->dim(0) == spec.out_channels,
              "conv2d bias " << shape_str(bias->shape()));
  }
  const int64_t n = x.dim(0), h = x.dim(2), wdt = x.dim(3);
  const int64_t ho = detail::conv_out_size(h, spec.kernel_h, spec.stride, spec.pad, "conv2d");
  const int64_t wo = detail::conv_out_size(wdt, spec.kernel_w, spec.stride, spec.pad, "conv2d");
  const int64_t g = spec.groups;
  const int64_t rows = int64_t(spec.in_channels) * spec.kernel_h * spec.kernel_w;
  const int64_t rows_g = rows / g;
  const int64_t og = spec.out_channels / g;
  const int64_t l = ho * wo;

  Tensor<T> y({n, spec.out_channels, ho, wo});
  const int64_t chunk = detail::conv_chunk_samples(n, rows, l);
  std::vector<T> cols(rows * chunk * l);
  std::vector<T> out_buf(og * chunk * l);

  for (int64_t n0 = 0; n0 < n; n0 += chunk) {
    const int64_t cn = std::min(chunk, n - n0);
    const int64_t ld = cn * l;
    for (int64_t s = 0; s < cn; ++s) {
      detail::im2col_block(x.data() + x.offset4(n0 + s, 0, 0, 0), spec.in_channels, h, wdt,
                           spec.kernel_h, spec.kernel_w, spec.stride, spec.pad, ho, wo, cols.data(),
                           ld, s * l);
    }
    for (int64_t gi = 0; gi < g; ++gi) {
      detail::ConstMatMap<T> wm(w.data() + gi * og * rows_g, og, rows_g);
      detail::ConstMatMap<T> cm(cols.data() + gi * rows_g * ld, rows_g, ld);
      detail::MatMap<T> om(out_buf.data(), og, ld);
      om.noalias() = wm * cm;
      for (int64_t s = 0; s < cn; ++s) {
        for (int64_t o = 0; o < og; ++o) {
          std::copy(out_buf.data() + o * ld + s * l, out_buf.data() + o * ld + s * l + l,
                    y.data() + y.offset4(n0 + s, gi * og + o, 0, 0));
        }
      }
    }
  }
  if (bias) {
    for (int64_t b = 0; b < n; ++b)
      for (int64_t o = 0; o < spec.out_channels; ++o) {
        T* dst = y.data() + y.offset4(b, o, 0, 0);
        const T bv = (*bias)[o];
        for (int64_t j = 0; j < l; ++j) dst[j] += bv;
      }
  }
  require_finite(y, "conv2d");

  const bool track_bias = bias && tape && tape->tracks(*bias);
  if ((tape && (tape->tracks(x) || tape->tracks(w))) || track_bias) {
    tape->mark(y);
    const bool tx = tape->tracks(x), tw = tape->tracks(w);
    Tensor<T> bt = bias ? *bias : Tensor<T>();
    auto sp = spec;
    tape->push([x, w, y, bt, sp, tx, tw, track_bias, n, h, wdt, ho, wo, g, rows, rows_g, og,
                l]() mutable {
      const int64_t chunk = detail::conv_chunk_samples(n, rows, l);
      std::vector<T> cols(rows * chunk * l);
      std::vector<T> gy_buf(og * chunk * l);
      std::vector<T> gcols(tx ? rows * chunk * l : 0);
      for (int64_t n0 = 0; n0 < n; n0 += chunk) {
        const int64_t cn = std::min(chunk, n - n0);
        const int64_t ld = cn * l;
        if (tw) {
          for (int64_t s = 0; s < cn; ++s) {
            detail::im2col_block(x.data() + x.offset4(n0 + s, 0, 0, 0), sp.in_channels, h, wdt,
                                 sp.kernel_h, sp.kernel_w, sp.stride, sp.pad, ho, wo, cols.data(),
                                 ld, s * l);
          }
        }
        for (int64_t gi = 0; gi < g; ++gi) {
          for (int64_t s = 0; s < cn; ++s) {
            for (int64_t o = 0; o < og; ++o) {
              const T* src = y.grad() + y.offset4(n0 + s, gi * og + o, 0, 0);
              std::copy(src, src + l, gy_buf.data() + o * ld + s * l);
            }
          }
          detail::ConstMatMap<T> gym(gy_buf.data(), og, ld);
          if (tw) {
            detail::ConstMatMap<T> cm(cols.data() + gi * rows_g * ld, rows_g, ld);
            detail::MatMap<T> gwm(w.grad() + gi * og * rows_g, og, rows_g);
            gwm.noalias() += gym * cm.transpose();
          }
          if (tx) {
            detail::ConstMatMap<T> wm(w.data() + gi * og * rows_g, og, rows_g);
            detail::MatMap<T> gcm(gcols.data() + gi * rows_g * ld, rows_g, ld);
            gcm.noalias() = wm.transpose() * gym;
          }
        }
        if (tx) {
          for (int64_t s = 0; s < cn; ++s) {
            detail::col2im_block(gcols.data(), ld, s * l, sp.in_channels, h, wdt, sp.kernel_h,
                                 sp.kernel_w, sp.stride, sp.pad, ho, wo,
                                 x.grad() + x.offset4(n0 + s, 0, 0, 0));
          }
        }
      }
      if (track_bias) {
        T* gb = bt.grad();
        for (int64_t b = 0; b < n; ++b)
          for (int64_t o = 0; o < sp.out_channels; ++o) {
            const T* src = y.grad() + y.offset4(b, o, 0, 0);
            T acc = T(0);
            for (int64_t j = 0; j < l; ++j) acc += src[j];
            gb[o] += acc;
          }
      }
    });
  }
  return y;
}

/// Transposed convolution (stride-r upsampling form), groups = 1.
/// Weights are [in_channels, out_channels, kh, kw]; the output size is
/// (H - 1) * stride + k - 2 * pad.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad,
                           const Tensor<std::type_identity_t<T>>* bias = nullptr,
                           Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && w.ndim() == 4 && x.dim(1) == w.dim(0),
            "conv_transpose2d input " << shape_str(x.shape()) << " vs weights "
                                      << shape_str(w.shape()));
  A2U_CHECK(stride >= 1 && pad >= 0, "conv_transpose2d stride/pad");
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wdt = x.dim(3);
  const int64_t co = w.dim(1);
  const int kh = static_cast<int>(w.dim(2)), kw = static_cast<int>(w.dim(3));
  const int64_t ho = (h - 1) * stride + kh - 2 * pad;
  const int64_t wo = (wdt - 1) * stride + kw - 2 * pad;
  A2U_CHECK(ho >= 1 && wo >= 1, "conv_transpose2d yields empty output");
  if (bias) A2U_CHECK(bias->ndim() == 1 && bias->dim(0) == co, "conv_transpose2d bias shape");

  // y_cols[o*k*k + ab, i*W+j] = sum_c w[c, o, ab] x[c, i, j]; col2im scatters
  // the windows into the output with the forward stride acting as placement.
  const int64_t rows = co * kh * kw, l = h * wdt;
  Tensor<T> y({n, co, ho, wo});
  std::vector<T> colbuf(rows * l);
  detail::ConstMatMap<T> wm(w.data(), ci, rows);
  for (int64_t b = 0; b < n; ++b) {
    detail::ConstMatMap<T> xm(x.data() + x.offset4(b, 0, 0, 0), ci, l);
    detail::MatMap<T> cm(colbuf.data(), rows, l);
    cm.noalias() = wm.transpose() * xm;
    detail::col2im_block(colbuf.data(), l, 0, co, ho, wo, kh, kw, stride, pad, h, wdt,
                         y.data() + y.offset4(b, 0, 0, 0));
  }
  if (bias) {
    for (int64_t b = 0; b < n; ++b)
      for (int64_t o = 0; o < co; ++o) {
        T* dst = y.data() + y.offset4(b, o, 0, 0);
        for (int64_t j = 0; j < ho * wo; ++j) dst[j] += (*bias)[o];
      }
  }
  require_finite(y, "conv_transpose2d");

  const bool track_bias = bias && tape && tape->tracks(*bias);
  if ((tape && (tape->tracks(x) || tape->tracks(w))) || track_bias) {
    tape->mark(y);
    const bool tx = tape->tracks(x), tw = tape->tracks(w);
    Tensor<T> bt = bias ? *bias : Tensor<T>();
    tape->push([x, w, y, bt, stride, pad, tx, tw, track_bias, n, ci, co, h, wdt, ho, wo, kh, kw,
                rows, l]() mutable {
      std::vector<T> gy_cols(rows * l);
      detail::ConstMatMap<T> wm(w.data(), ci, rows);
      for (int64_t b = 0; b < n; ++b) {
        detail::im2col_block(y.grad() + y.offset4(b, 0, 0, 0), co, ho, wo, kh, kw, stride, pad, h,
                             wdt, gy_cols.data(), l, 0);
        detail::ConstMatMap<T> gcm(gy_cols.data(), rows, l);
        if (tx) {
          detail::MatMap<T> gxm(x.grad() + x.offset4(b, 0, 0, 0), ci, l);
          gxm.noalias() += wm * gcm;
        }
        if (tw) {
          detail::ConstMatMap<T> xm(x.data() + x.offset4(b, 0, 0, 0), ci, l);
          detail::MatMap<T> gwm(w.grad(), ci, rows);
          gwm.noalias() += xm * gcm.transpose();
        }
      }
      if (track_bias) {
        T* gb = bt.grad();
        for (int64_t b = 0; b < n; ++b)
          for (int64_t o = 0; o < co; ++o) {
            const T* src = y.grad() + y.offset4(b, o, 0, 0);
            T acc = T(0);
            for (int64_t j = 0; j < ho * wo; ++j) acc += src[j];
            gb[o] += acc;
          }
      }
    });
  }
  return y;
}

}  // namespace a2u

#endif  // A2U_CONV_HPP_
