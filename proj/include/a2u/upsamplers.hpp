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

#ifndef A2U_UPSAMPLERS_HPP_
#define A2U_UPSAMPLERS_HPP_

#include <type_traits>
#include <array>
#include <fstream>

#include <nlohmann/json.hpp>

#include "a2u/conv.hpp"
#include "a2u/kernel_map.hpp"
#include "a2u/ops.hpp"

namespace a2u {

enum class UpKind {
  Nearest,
  Bilinear,
  Deconv,
  PixelShuffle,
  MaxUnpool,
  Carafe,
  IndexNetHolistic,
  A2U,
};

// ---------------------------------------------------------------------------
// Distance-based upsampling
// ---------------------------------------------------------------------------

/// Weights of 4-point bilinear interpolation at fractional offsets, ordered
/// (x0,y0), (x1,y0), (x0,y1), (x1,y1). They sum to 1 exactly.
template <typename T>
std::array<T, 4> bilinear_kernel_weights(T fx, T fy) {
  A2U_CHECK(fx >= T(0) && fx <= T(1) && fy >= T(0) && fy <= T(1),
            "bilinear fractions must lie in [0,1]");
  return {(T(1) - fx) * (T(1) - fy), fx * (T(1) - fy), (T(1) - fx) * fy, fx * fy};
}

/// Integer-ratio nearest neighbor: out(i', j') = in(floor(i'/r), floor(j'/r)).
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && r >= 1, "upsample_nearest ratio must be >= 1, got " << r);
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, h * r, w * r});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < h * r; ++i)
        for (int64_t j = 0; j < w * r; ++j) y.at4(b, cc, i, j) = x.at4(b, cc, i / r, j / r);
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, r, n, c, h, w]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < h * r; ++i)
            for (int64_t j = 0; j < w * r; ++j)
              gx[x.offset4(b, cc, i / r, j / r)] += gy[y.offset4(b, cc, i, j)];
    });
  }
  return y;
}

/// Bilinear resampling with the align-corners=false convention and replicated
/// borders. Output extrema never exceed input extrema.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int64_t ho, int64_t wo, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(x.ndim() == 4 && ho >= 1 && wo >= 1, "bilinear_resize target size");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const double sy = static_cast<double>(h) / ho, sx = static_cast<double>(w) / wo;

  // Per-axis sample positions are shared by all rows/columns.
  std::vector<int64_t> iy0(ho), iy1(ho), ix0(wo), ix1(wo);
  std::vector<T> fy(ho), fx(wo);
  for (int64_t i = 0; i < ho; ++i) {
    const double src = (i + 0.5) * sy - 0.5;
    const double fl = std::floor(src);
    iy0[i] = std::clamp<int64_t>(static_cast<int64_t>(fl), 0, h - 1);
    iy1[i] = std::clamp<int64_t>(static_cast<int64_t>(fl) + 1, 0, h - 1);
    fy[i] = static_cast<T>(std::clamp(src - fl, 0.0, 1.0));
  }
  for (int64_t j = 0; j < wo; ++j) {
    const double src = (j + 0.5) * sx - 0.5;
    const double fl = std::floor(src);
    ix0[j] = std::clamp<int64_t>(static_cast<int64_t>(fl), 0, w - 1);
    ix1[j] = std::clamp<int64_t>(static_cast<int64_t>(fl) + 1, 0, w - 1);
    fx[j] = static_cast<T>(std::clamp(src - fl, 0.0, 1.0));
  }

  Tensor<T> y({n, c, ho, wo});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < ho; ++i)
        for (int64_t j = 0; j < wo; ++j) {
          const auto wts = bilinear_kernel_weights<T>(fx[j], fy[i]);
          y.at4(b, cc, i, j) = wts[0] * x.at4(b, cc, iy0[i], ix0[j]) +
                               wts[1] * x.at4(b, cc, iy0[i], ix1[j]) +
                               wts[2] * x.at4(b, cc, iy1[i], ix0[j]) +
                               wts[3] * x.at4(b, cc, iy1[i], ix1[j]);
        }
  require_finite(y, "bilinear_resize");
  if (detail::recording(tape, x)) {
    tape->mark(y);
    tape->push([x, y, iy0, iy1, ix0, ix1, fy, fx, n, c, ho, wo]() mutable {
      const T* gy = y.grad();
      T* gx = x.grad();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < ho; ++i)
            for (int64_t j = 0; j < wo; ++j) {
              const auto wts = bilinear_kernel_weights<T>(fx[j], fy[i]);
              const T g = gy[y.offset4(b, cc, i, j)];
              gx[x.offset4(b, cc, iy0[i], ix0[j])] += wts[0] * g;
              gx[x.offset4(b, cc, iy0[i], ix1[j])] += wts[1] * g;
              gx[x.offset4(b, cc, iy1[i], ix0[j])] += wts[2] * g;
              gx[x.offset4(b, cc, iy1[i], ix1[j])] += wts[3] * g;
            }
    });
  }
  return y;
}

/// Fixed-rule upsampling (kind in {Nearest, Bilinear}).
template <typename T>
Tensor<T> upsample_fixed(UpKind kind, const Tensor<T>& x, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(r >= 1, "upsample ratio must be >= 1, got " << r);
  switch (kind) {
    case UpKind::Nearest:
      return upsample_nearest(x, r, tape);
    case UpKind::Bilinear:
      return bilinear_resize(x, x.dim(2) * r, x.dim(3) * r, tape);
    default:
      A2U_CHECK(false, "upsample_fixed expects Nearest or Bilinear");
  }
  return {};
}

// ---------------------------------------------------------------------------
// Learned upsampling
// ---------------------------------------------------------------------------

/// Zero padding that makes a stride-r window conv of side k produce exactly
/// H/r positions: front pad ceil((k-r)/2), back pad floor((k-r)/2).
template <typename T>
Tensor<T> encoder_pad(const Tensor<T>& x, int k, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(k >= r, "encoding kernel side " << k << " must be >= stride " << r);
  const int lo = (k - r + 1) / 2, hi = (k - r) / 2;
  if (lo == 0 && hi == 0) return x;
  return pad2d(x, lo, lo, hi, hi, tape);
}

/// Kernel generation in the reassembly style: a k_enc x k_enc content encoder
/// on the low-resolution decoder feature emits r^2*k_up^2 channels that are
/// pixel-shuffled to full resolution and softmax-normalized per position.
/// Weights are [r^2*k_up^2, C, k_enc, k_enc], no bias.
template <typename T>
KernelMap<T> carafe_generate(const Tensor<T>& decoder_feat, const Tensor<T>& weights, int k_up,
                             int k_enc, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(decoder_feat.ndim() == 4 && k_up >= 1 && k_enc >= 1 && r >= 1, "carafe_generate args");
  A2U_CHECK(k_enc % 2 == 1, "carafe encoder kernel must be odd, got " << k_enc);
  const int64_t c = decoder_feat.dim(1);
  ConvSpec spec{.out_channels = r * r * k_up * k_up,
                .in_channels = static_cast<int>(c),
                .kernel_h = k_enc,
                .kernel_w = k_enc,
                .stride = 1,
                .pad = (k_enc - 1) / 2,
                .groups = 1,
                .has_bias = false};
  A2U_CHECK(weights.shape() == spec.weight_shape(),
            "carafe encoder weights " << shape_str(weights.shape()) << " vs "
                                      << shape_str(spec.weight_shape()));
  Tensor<T> logits = conv2d(decoder_feat, spec, weights, nullptr, tape);
  logits = pixel_shuffle(logits, r, tape);
  Tensor<T> kernels = softmax(logits, 1, tape);
  return KernelMap<T>{kernels, k_up, r, KernelDir::Up, true};
}

template <typename T>
struct IndexMaps {
  KernelMap<T> up;    // s = 1, one sigmoid scalar per high-resolution position
  KernelMap<T> down;  // s = r, mass-preserving weights per low-resolution position
  Tensor<T> logits;   // pre-sigmoid map [N, 1, H, W]
};

/// Holistic index generation from the high-resolution encoder feature: one
/// stride-r conv emits r^2 maps that shuffle to full resolution. The up map
/// is the sigmoid of those logits; the down map renormalizes the same scalars
/// with a softmax over each r x r group. Weights [r^2, C, k_enc, k_enc].
template <typename T>
IndexMaps<T> indexnet_generate(const Tensor<T>& encoder_feat, const Tensor<T>& weights, int k_enc,
                               int stride, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(encoder_feat.ndim() == 4 && stride >= 1, "indexnet_generate args");
  A2U_CHECK(encoder_feat.dim(2) % stride == 0 && encoder_feat.dim(3) % stride == 0,
            "indexnet_generate: spatial dims must divide by stride");
  const int64_t c = encoder_feat.dim(1);
  const int r = stride;
  ConvSpec spec{.out_channels = r * r,
                .in_channels = static_cast<int>(c),
                .kernel_h = k_enc,
                .kernel_w = k_enc,
                .stride = r,
                .pad = 0,
                .groups = 1,
                .has_bias = false};
  A2U_CHECK(weights.shape() == spec.weight_shape(),
            "index encoder weights " << shape_str(weights.shape()) << " vs "
                                     << shape_str(spec.weight_shape()));
  Tensor<T> padded = encoder_pad(encoder_feat, k_enc, r, tape);
  Tensor<T> logits = conv2d(padded, spec, weights, nullptr, tape);  // [N, r^2, H/r, W/r]
  Tensor<T> full = pixel_shuffle(logits, r, tape);                  // [N, 1, H, W]
  Tensor<T> up = sigmoid(full, tape);

  Tensor<T> grouped = pixel_unshuffle(up, r, tape);  // [N, r^2, H/r, W/r]
  Tensor<T> down = softmax(grouped, 1, tape);

  return IndexMaps<T>{KernelMap<T>{up, 1, r, KernelDir::Up, true},
                      KernelMap<T>{down, r, r, KernelDir::Down, true}, full};
}

/// Stride-r transposed convolution with a 2r x 2r kernel (C -> C), the
/// learned universal-kernel upsampler. Weights [C, C, 2r, 2r].
template <typename T>
Tensor<T> deconv_upsample(const Tensor<T>& x, const Tensor<T>& w, int r, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(r >= 2 && r % 2 == 0, "deconv_upsample supports even ratios, got " << r);
  A2U_CHECK(w.ndim() == 4 && w.dim(0) == x.dim(1) && w.dim(1) == x.dim(1) &&
                w.dim(2) == 2 * r && w.dim(3) == 2 * r,
            "deconv_upsample weights " << shape_str(w.shape()));
  return conv_transpose2d(x, w, r, r / 2, nullptr, tape);
}

/// 3x3 conv to C*r^2 channels followed by a pixel shuffle.
/// Weights [C*r^2, C, 3, 3].
template <typename T>
Tensor<T> pixelshuffle_upsample(const Tensor<T>& x, const Tensor<T>& w, int r,
                                Tape<std::type_identity_t<T>>* tape = nullptr) {
  const int64_t c = x.dim(1);
  ConvSpec spec{.out_channels = static_cast<int>(c) * r * r,
                .in_channels = static_cast<int>(c),
                .kernel_h = 3,
                .kernel_w = 3,
                .stride = 1,
                .pad = 1,
                .groups = 1,
                .has_bias = false};
  A2U_CHECK(w.shape() == spec.weight_shape(), "pixelshuffle_upsample weights");
  return pixel_shuffle(conv2d(x, spec, w, nullptr, tape), r, tape);
}

// ---------------------------------------------------------------------------
// Kernel map dumping
// ---------------------------------------------------------------------------

inline const char* kernel_dir_name(KernelDir d) { return d == KernelDir::Up ? "up" : "down"; }

/// Binary blob of little-endian float32 kernels plus a JSON sidecar
/// {shape, s, r, direction}.
template <typename T>
void write_kernel_map(const KernelMap<T>& kmap, const std::string& blob_path,
                      const std::string& sidecar_path) {
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open kernel blob for writing: " + blob_path);
  for (int64_t i = 0; i < kmap.kernels.size(); ++i) {
    const float v = static_cast<float>(kmap.kernels[i]);
    blob.write(reinterpret_cast<const char*>(&v), sizeof(float));
  }
  if (!blob) throw IoError("short write on kernel blob: " + blob_path);
  nlohmann::ordered_json sidecar{{"shape", kmap.kernels.shape()},
                                 {"s", kmap.s},
                                 {"r", kmap.r},
                                 {"direction", kernel_dir_name(kmap.direction)}};
  std::ofstream side(sidecar_path);
  if (!side) throw IoError("cannot open kernel sidecar for writing: " + sidecar_path);
  side << sidecar.dump(2) << "\n";
}

}  // namespace a2u

#endif  // A2U_UPSAMPLERS_HPP_
