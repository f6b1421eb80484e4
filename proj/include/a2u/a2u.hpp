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

#ifndef A2U_A2U_HPP_
#define A2U_A2U_HPP_

#include <string>
#include <type_traits>
#include <vector>

#include "a2u/kernel_map.hpp"
#include "a2u/nn.hpp"
#include "a2u/upsamplers.hpp"

namespace a2u {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class A2UMode { Static, Hybrid, Dynamic };
enum class ChannelScheme { Shared, Wise };  // cs / cw
enum class KernelNorm { Softmax, SigmoidSoftmax };

/// Variant matrix of the affinity-aware upsampler. Defaults are the ablation
/// winners: s_u = 3, k_en = 5, sigmoid+softmax normalization, rank 1.
struct A2UConfig {
  A2UMode mode = A2UMode::Static;
  ChannelScheme channel = ChannelScheme::Wise;
  bool pointwise = false;
  int rank = 1;  // d
  int k_en = 5;
  int s_u = 3;
  int ratio = 2;  // r
  KernelNorm normalization = KernelNorm::SigmoidSoftmax;
  bool encoder_norm_nonlin = false;
  bool paired_down = false;
  int s_d = 0;  // 0 selects the default r^2 * s_u

  int down_side() const { return s_d > 0 ? s_d : ratio * ratio * s_u; }
  int sets() const { return pointwise ? ratio * ratio : 1; }        // weight sets for U, V
  int proj_sets() const { return pointwise ? 1 : ratio * ratio; }  // weight sets for P

  void validate() const {
    A2U_CHECK(rank >= 1, "rank must be >= 1");
    A2U_CHECK(k_en >= 1 && s_u >= 1 && ratio >= 1, "kernel sides and ratio must be >= 1");
    if (mode == A2UMode::Dynamic) {
      A2U_CHECK(rank == 1, "dynamic mode uses 1x1 encodings, which bound the rank to 1");
    } else {
      A2U_CHECK(rank <= k_en * k_en,
                "rank " << rank << " exceeds the bound k_en^2 = " << k_en * k_en);
      A2U_CHECK(k_en >= ratio, "encoding kernel side " << k_en << " must cover stride " << ratio);
    }
    A2U_CHECK(!pointwise || mode == A2UMode::Static,
              "pointwise kernels are defined for the static mode only");
    if (paired_down) {
      A2U_CHECK(!pointwise, "paired downsampling requires the shuffle path");
      A2U_CHECK((down_side() - ratio) % 2 == 0,
                "downsampling kernel side " << down_side() << " minus ratio " << ratio
                                            << " must be even");
    }
  }
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Learnable state. Which tensors exist depends on the mode:
///   static          u, v, p (+ p_down)
///   hybrid          u, v, wp (+ wp_down)
///   dynamic         wu, wv, wp (+ wp_down)
/// u and v hold `sets * d` depthwise kernels of side k_en each, row g*d+rr for
/// weight set g and rank row rr; channel-shared variants store one kernel per
/// row, channel-wise store C.
template <typename T>
struct A2UParams {
  Tensor<T> u, v;            // [sets*d, Cw, k_en, k_en]
  Tensor<T> p;               // [proj_sets*s_u^2, d, 1, 1]
  Tensor<T> wp;              // [proj_sets*s_u^2*d, C]
  Tensor<T> wu, wv;          // [C or 1, C]
  Tensor<T> p_down;          // [s_d^2, d, 1, 1]
  Tensor<T> wp_down;         // [s_d^2*d, C]
  Tensor<T> enc_gamma_u, enc_beta_u, enc_gamma_v, enc_beta_v;  // [C]
  BnState<T> enc_bn_u, enc_bn_v;
  int channels = 0;

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    if (u.defined()) reg.add(prefix + ".u", u);
    if (v.defined()) reg.add(prefix + ".v", v);
    if (p.defined()) reg.add(prefix + ".p", p);
    if (wp.defined()) reg.add(prefix + ".wp", wp);
    if (wu.defined()) reg.add(prefix + ".wu", wu);
    if (wv.defined()) reg.add(prefix + ".wv", wv);
    if (p_down.defined()) reg.add(prefix + ".p_down", p_down);
    if (wp_down.defined()) reg.add(prefix + ".wp_down", wp_down);
    if (enc_gamma_u.defined()) {
      reg.add(prefix + ".enc_bn_u.gamma", enc_gamma_u);
      reg.add(prefix + ".enc_bn_u.beta", enc_beta_u);
      reg.add(prefix + ".enc_bn_u.running_mean", enc_bn_u.running_mean, false);
      reg.add(prefix + ".enc_bn_u.running_var", enc_bn_u.running_var, false);
      reg.add(prefix + ".enc_bn_v.gamma", enc_gamma_v);
      reg.add(prefix + ".enc_bn_v.beta", enc_beta_v);
      reg.add(prefix + ".enc_bn_v.running_mean", enc_bn_v.running_mean, false);
      reg.add(prefix + ".enc_bn_v.running_var", enc_bn_v.running_var, false);
    }
  }
};

template <typename T>
A2UParams<T> make_a2u_params(const A2UConfig& cfg, int channels, Rng& rng) {
  cfg.validate();
  A2U_CHECK(channels >= 1, "a2u params need a positive channel count");
  A2UParams<T> params;
  params.channels = channels;
  const int64_t cw = cfg.channel == ChannelScheme::Wise ? channels : 1;
  const int64_t d = cfg.rank, k = cfg.k_en, s2 = int64_t(cfg.s_u) * cfg.s_u;

  if (cfg.mode != A2UMode::Dynamic) {
    const Shape enc_shape{cfg.sets() * d, cw, k, k};
    params.u = fan_in_uniform<T>(enc_shape, k * k, rng);
    params.v = fan_in_uniform<T>(enc_shape, k * k, rng);
  } else {
    params.wu = fan_in_uniform<T>({cw, channels}, channels, rng);
    params.wv = fan_in_uniform<T>({cw, channels}, channels, rng);
  }
  if (cfg.mode == A2UMode::Static) {
    params.p = fan_in_uniform<T>({cfg.proj_sets() * s2, d, 1, 1}, d, rng);
  } else {
    params.wp = fan_in_uniform<T>({cfg.proj_sets() * s2 * d, channels}, channels, rng);
  }
  if (cfg.paired_down) {
    const int64_t sd2 = int64_t(cfg.down_side()) * cfg.down_side();
    if (cfg.mode == A2UMode::Static) {
      params.p_down = fan_in_uniform<T>({sd2, d, 1, 1}, d, rng);
    } else {
      params.wp_down = fan_in_uniform<T>({sd2 * d, channels}, channels, rng);
    }
  }
  if (cfg.encoder_norm_nonlin) {
    params.enc_gamma_u = Tensor<T>::ones({channels});
    params.enc_beta_u = Tensor<T>::zeros({channels});
    params.enc_gamma_v = Tensor<T>::ones({channels});
    params.enc_beta_v = Tensor<T>::zeros({channels});
    params.enc_bn_u.init(channels);
    params.enc_bn_v.init(channels);
  }
  return params;
}

/// Closed-form trainable parameter count (rank 1, the analyzed case).
inline int64_t a2u_param_count(const A2UConfig& cfg, int channels) {
  cfg.validate();
  A2U_CHECK(cfg.rank == 1, "parameter formulas assume rank 1");
  const int64_t c = channels;
  const int64_t k2 = int64_t(cfg.k_en) * cfg.k_en;
  const int64_t s2 = int64_t(cfg.s_u) * cfg.s_u;
  const int64_t r2 = int64_t(cfg.ratio) * cfg.ratio;
  const int64_t cw = cfg.channel == ChannelScheme::Wise ? c : 1;

  int64_t count = 0;
  switch (cfg.mode) {
    case A2UMode::Static:
      count = cfg.pointwise ? r2 * 2 * k2 * cw + s2 : r2 * s2 + 2 * k2 * cw;
      break;
    case A2UMode::Hybrid:
      count = r2 * s2 * c + 2 * k2 * cw;
      break;
    case A2UMode::Dynamic:
      count = r2 * s2 * c + 2 * c * cw;
      break;
  }
  if (cfg.paired_down) {
    const int64_t sd2 = int64_t(cfg.down_side()) * cfg.down_side();
    count += cfg.mode == A2UMode::Static ? sd2 : sd2 * c;
  }
  if (cfg.encoder_norm_nonlin) count += 4 * c;
  return count;
}

// ---------------------------------------------------------------------------
// Reference oracle (Eq. form: w = sum_k x_k^T A_k y_k)
// ---------------------------------------------------------------------------

/// Brute-force bilinear form over explicit per-channel affinity matrices.
/// X is [C, N], Y is [C, M], A is [C, N, M]. Reference only: double
/// precision, not differentiable, not optimized.
inline double bilinear_oracle(const Tensor<double>& x, const Tensor<double>& y,
                              const Tensor<double>& a) {
  A2U_CHECK(x.ndim() == 2 && y.ndim() == 2 && a.ndim() == 3, "bilinear_oracle ranks");
  const int64_t c = x.dim(0), n = x.dim(1), m = y.dim(1);
  A2U_CHECK(y.dim(0) == c && a.dim(0) == c && a.dim(1) == n && a.dim(2) == m,
            "bilinear_oracle shapes: X " << shape_str(x.shape()) << " Y " << shape_str(y.shape())
                                         << " A " << shape_str(a.shape()));
  double w = 0.0;
  for (int64_t k = 0; k < c; ++k) {
    for (int64_t i = 0; i < n; ++i) {
      double t = 0.0;
      for (int64_t j = 0; j < m; ++j) t += a[(k * n + i) * m + j] * y[k * m + j];
      w += x[k * n + i] * t;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Kernel generation
// ---------------------------------------------------------------------------

template <typename T>
struct A2UHooks {
  /// Replaces the encoded U branch with all-ones, which reduces the kernel
  /// logits to a first-order (linear) function of the paired feature.
  bool force_u_branch_ones = false;
};

template <typename T>
struct A2UDynamicWeights {
  Tensor<T> p;     // [N, proj_sets*s_u^2, d]
  Tensor<T> u, v;  // [N, C or 1]; dynamic mode only
};

namespace detail {

/// One encoder branch for weight set `set`: depthwise stride-r convs of the
/// rank rows, optional BatchNorm+ReLU, giving rank outputs [N, C, H/r, W/r].
template <typename T>
std::vector<Tensor<T>> a2u_branch(const Tensor<T>& padded, const Tensor<T>& kernels, int set,
                                  const A2UConfig& cfg, int channels, const Tensor<T>* bn_gamma,
                                  const Tensor<T>* bn_beta, BnState<T>* bn_state, bool training,
                                  Tape<std::type_identity_t<T>>* tape) {
  const int64_t cw = kernels.dim(1);
  ConvSpec spec{.out_channels = channels,
                .in_channels = channels,
                .kernel_h = cfg.k_en,
                .kernel_w = cfg.k_en,
                .stride = cfg.ratio,
                .pad = 0,
                .groups = channels,
                .has_bias = false};
  std::vector<Tensor<T>> ranks;
  ranks.reserve(cfg.rank);
  for (int rr = 0; rr < cfg.rank; ++rr) {
    Tensor<T> row = slice_rows(kernels, int64_t(set) * cfg.rank + rr, 1, tape);
    row = row.reshaped({cw, 1, cfg.k_en, cfg.k_en});
    if (cw == 1 && channels > 1) row = repeat_rows(row, channels, tape);
    Tensor<T> enc = conv2d(padded, spec, row, nullptr, tape);
    if (cfg.encoder_norm_nonlin) {
      enc = batchnorm2d(enc, *bn_gamma, *bn_beta, *bn_state, training, tape);
      enc = relu(enc, tape);
    }
    ranks.push_back(std::move(enc));
  }
  return ranks;
}

/// Hadamard product of paired branch outputs summed over channels: the rank
/// maps [N, d, H/r, W/r] of one weight set (order of parts is rank-major so a
/// later pixel shuffle interleaves weight sets into sub-positions).
template <typename T>
Tensor<T> a2u_rank_maps_one_set(const std::vector<Tensor<T>>& branch_u,
                                const std::vector<Tensor<T>>& branch_v, Tape<std::type_identity_t<T>>* tape) {
  std::vector<Tensor<T>> maps;
  maps.reserve(branch_u.size());
  for (size_t rr = 0; rr < branch_u.size(); ++rr) {
    maps.push_back(channel_sum(mul(branch_u[rr], branch_v[rr], tape), tape));
  }
  return concat_channels(maps, tape);
}

}  // namespace detail

/// Effective per-sample weights conditioned on the input through global
/// average pooling and a bias-free 1x1 map. Hybrid conditions only the
/// projection; dynamic additionally generates the 1x1 depthwise encoders.
template <typename T>
A2UDynamicWeights<T> a2u_generate_dynamic_weights(const Tensor<T>& x, const A2UParams<T>& params,
                                                  const A2UConfig& cfg, Tape<std::type_identity_t<T>>* tape = nullptr) {
  cfg.validate();
  A2U_CHECK(cfg.mode != A2UMode::Static, "dynamic weight generation is undefined in static mode");
  A2U_CHECK(x.ndim() == 4 && x.dim(1) == params.channels,
            "a2u pairing feature " << shape_str(x.shape()) << " vs C=" << params.channels);
  const int64_t n = x.dim(0);
  Tensor<T> g = global_avg_pool(x, tape).reshaped({n, params.channels});
  A2UDynamicWeights<T> out;
  const int64_t s2 = int64_t(cfg.s_u) * cfg.s_u;
  out.p = linear(g, params.wp, tape).reshaped({n, cfg.proj_sets() * s2, int64_t(cfg.rank)});
  if (cfg.mode == A2UMode::Dynamic) {
    out.u = linear(g, params.wu, tape);
    out.v = linear(g, params.wv, tape);
  }
  return out;
}

/// Raw (pre-normalization) upsampling kernel logits [N, s_u^2, H, W] from the
/// high-resolution pairing features. The intended use is self-similarity
/// (y is the same feature as x).
template <typename T>
Tensor<T> a2u_generate_logits(const Tensor<T>& x, const Tensor<T>& y, A2UParams<T>& params,
                              const A2UConfig& cfg, Tape<std::type_identity_t<T>>* tape = nullptr,
                              const A2UHooks<std::type_identity_t<T>>* hooks = nullptr,
                              bool training = false) {
  cfg.validate();
  A2U_CHECK(x.ndim() == 4 && same_shape(x, y), "a2u pairing features must share one shape");
  A2U_CHECK(x.dim(1) == params.channels,
            "a2u feature channels " << x.dim(1) << " vs params C=" << params.channels);
  A2U_CHECK(x.dim(2) % cfg.ratio == 0 && x.dim(3) % cfg.ratio == 0,
            "a2u feature size " << shape_str(x.shape()) << " not divisible by ratio " << cfg.ratio);
  const int64_t n = x.dim(0);
  const int channels = params.channels;
  const bool force_ones = hooks && hooks->force_u_branch_ones;

  // Rank maps per weight set at H/r x W/r.
  std::vector<Tensor<T>> set_maps;
  if (cfg.mode == A2UMode::Dynamic) {
    A2UDynamicWeights<T> eff = a2u_generate_dynamic_weights(x, params, cfg, tape);
    Tensor<T> xs = stride_slice(x, cfg.ratio, tape);
    Tensor<T> ys = stride_slice(y, cfg.ratio, tape);
    Tensor<T> bu = force_ones ? Tensor<T>::ones(xs.shape())
                              : depthwise_scale_per_sample(xs, eff.u, tape);
    Tensor<T> bv = depthwise_scale_per_sample(ys, eff.v, tape);
    set_maps.push_back(detail::a2u_rank_maps_one_set<T>({bu}, {bv}, tape));
    // Projection: per-sample P.
    Tensor<T> proj = pointwise_conv_per_sample(set_maps[0], eff.p, tape);
    return pixel_shuffle(proj, cfg.ratio, tape);
  }

  Tensor<T> px = encoder_pad(x, cfg.k_en, cfg.ratio, tape);
  Tensor<T> py = encoder_pad(y, cfg.k_en, cfg.ratio, tape);
  for (int set = 0; set < cfg.sets(); ++set) {
    std::vector<Tensor<T>> bu =
        detail::a2u_branch(px, params.u, set, cfg, channels,
                           cfg.encoder_norm_nonlin ? &params.enc_gamma_u : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_beta_u : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_bn_u : nullptr, training, tape);
    if (force_ones) {
      for (auto& b : bu) b = Tensor<T>::ones(b.shape());
    }
    std::vector<Tensor<T>> bv =
        detail::a2u_branch(py, params.v, set, cfg, channels,
                           cfg.encoder_norm_nonlin ? &params.enc_gamma_v : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_beta_v : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_bn_v : nullptr, training, tape);
    set_maps.push_back(detail::a2u_rank_maps_one_set(bu, bv, tape));
  }

  if (cfg.mode == A2UMode::Static && cfg.pointwise) {
    Tensor<T> full;  // [N, d, H, W]
    if (cfg.ratio == 1) {
      full = set_maps[0];
    } else {
      // Channels ordered rank-major, set-minor: pixel_shuffle then places set
      // g at sub-position (g / r, g % r).
      std::vector<Tensor<T>> parts;
      parts.reserve(size_t(cfg.rank) * cfg.sets());
      for (int rr = 0; rr < cfg.rank; ++rr)
        for (int g = 0; g < cfg.sets(); ++g) parts.push_back(slice_channels(set_maps[g], rr, 1, tape));
      full = pixel_shuffle(concat_channels(parts, tape), cfg.ratio, tape);
    }
    ConvSpec pspec{.out_channels = cfg.s_u * cfg.s_u,
                   .in_channels = cfg.rank,
                   .kernel_h = 1,
                   .kernel_w = 1,
                   .stride = 1,
                   .pad = 0,
                   .groups = 1,
                   .has_bias = false};
    return conv2d(full, pspec, params.p, nullptr, tape);
  }

  if (cfg.mode == A2UMode::Static) {
    ConvSpec pspec{.out_channels = cfg.proj_sets() * cfg.s_u * cfg.s_u,
                   .in_channels = cfg.rank,
                   .kernel_h = 1,
                   .kernel_w = 1,
                   .stride = 1,
                   .pad = 0,
                   .groups = 1,
                   .has_bias = false};
    Tensor<T> proj = conv2d(set_maps[0], pspec, params.p, nullptr, tape);
    return cfg.ratio == 1 ? proj : pixel_shuffle(proj, cfg.ratio, tape);
  }

  // Hybrid: static encoders, per-sample projection.
  A2UDynamicWeights<T> eff = a2u_generate_dynamic_weights(x, params, cfg, tape);
  Tensor<T> proj = pointwise_conv_per_sample(set_maps[0], eff.p, tape);
  return cfg.ratio == 1 ? proj : pixel_shuffle(proj, cfg.ratio, tape);
}

/// Normalizes raw logits to a kernel map: softmax or sigmoid-then-softmax
/// over the window entries of each position. A single-entry window would
/// always normalize to 1, so that case keeps the sigmoid alone and yields a
/// multiplicative gate in (0, 1).
template <typename T>
KernelMap<T> normalize_kernel_logits(const Tensor<T>& logits, int side, int ratio, KernelDir dir,
                                     KernelNorm norm, Tape<std::type_identity_t<T>>* tape = nullptr) {
  A2U_CHECK(logits.ndim() == 4 && logits.dim(1) == int64_t(side) * side,
            "kernel logits " << shape_str(logits.shape()) << " vs side " << side);
  Tensor<T> kernels;
  if (side == 1) {
    kernels = sigmoid(logits, tape);
  } else if (norm == KernelNorm::SigmoidSoftmax) {
    kernels = softmax(sigmoid(logits, tape), 1, tape);
  } else {
    kernels = softmax(logits, 1, tape);
  }
  return KernelMap<T>{kernels, side, ratio, dir, true};
}

/// Full upsampling kernel generation: logits then normalization.
template <typename T>
KernelMap<T> a2u_generate(const Tensor<T>& x, const Tensor<T>& y, A2UParams<T>& params,
                          const A2UConfig& cfg, Tape<std::type_identity_t<T>>* tape = nullptr,
                          const A2UHooks<std::type_identity_t<T>>* hooks = nullptr,
                          bool training = false) {
  Tensor<T> logits = a2u_generate_logits(x, y, params, cfg, tape, hooks, training);
  return normalize_kernel_logits(logits, cfg.s_u, cfg.ratio, KernelDir::Up, cfg.normalization,
                                 tape);
}

/// Paired downsampling kernels: the same encoders produce the rank maps, and
/// a separate projection emits s_d^2 weights per low-resolution position (the
/// maps already live on the low-resolution grid, so nothing shuffles).
template <typename T>
KernelMap<T> a2u_downsample_generate(const Tensor<T>& x, A2UParams<T>& params,
                                     const A2UConfig& cfg, Tape<std::type_identity_t<T>>* tape = nullptr,
                                     bool training = false) {
  cfg.validate();
  A2U_CHECK(cfg.paired_down, "a2u_downsample_generate requires paired_down");
  A2U_CHECK(x.ndim() == 4 && x.dim(1) == params.channels,
            "a2u pairing feature " << shape_str(x.shape()) << " vs C=" << params.channels);
  const int sd = cfg.down_side();

  Tensor<T> maps;  // [N, d, H/r, W/r]
  if (cfg.mode == A2UMode::Dynamic) {
    A2UDynamicWeights<T> eff = a2u_generate_dynamic_weights(x, params, cfg, tape);
    Tensor<T> xs = stride_slice(x, cfg.ratio, tape);
    Tensor<T> bu = depthwise_scale_per_sample(xs, eff.u, tape);
    Tensor<T> bv = depthwise_scale_per_sample(xs, eff.v, tape);
    maps = detail::a2u_rank_maps_one_set<T>({bu}, {bv}, tape);
  } else {
    Tensor<T> px = encoder_pad(x, cfg.k_en, cfg.ratio, tape);
    std::vector<Tensor<T>> bu =
        detail::a2u_branch(px, params.u, 0, cfg, params.channels,
                           cfg.encoder_norm_nonlin ? &params.enc_gamma_u : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_beta_u : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_bn_u : nullptr, training, tape);
    std::vector<Tensor<T>> bv =
        detail::a2u_branch(px, params.v, 0, cfg, params.channels,
                           cfg.encoder_norm_nonlin ? &params.enc_gamma_v : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_beta_v : nullptr,
                           cfg.encoder_norm_nonlin ? &params.enc_bn_v : nullptr, training, tape);
    maps = detail::a2u_rank_maps_one_set(bu, bv, tape);
  }

  Tensor<T> logits;
  if (cfg.mode == A2UMode::Static) {
    ConvSpec pspec{.out_channels = sd * sd,
                   .in_channels = cfg.rank,
                   .kernel_h = 1,
                   .kernel_w = 1,
                   .stride = 1,
                   .pad = 0,
                   .groups = 1,
                   .has_bias = false};
    logits = conv2d(maps, pspec, params.p_down, nullptr, tape);
  } else {
    const int64_t n = x.dim(0);
    Tensor<T> g = global_avg_pool(x, tape).reshaped({n, params.channels});
    Tensor<T> pd =
        linear(g, params.wp_down, tape).reshaped({n, int64_t(sd) * sd, int64_t(cfg.rank)});
    logits = pointwise_conv_per_sample(maps, pd, tape);
  }
  return normalize_kernel_logits(logits, sd, cfg.ratio, KernelDir::Down, cfg.normalization, tape);
}

}  // namespace a2u

#endif  // A2U_A2U_HPP_
