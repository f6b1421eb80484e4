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

#ifndef A2U_VERIFY_HPP_
#define A2U_VERIFY_HPP_

#include <functional>
#include <string>
#include <vector>

#include "a2u/a2u.hpp"
#include "a2u/gradcheck.hpp"
#include "a2u/nn.hpp"
#include "a2u/upsamplers.hpp"

namespace a2u::verify {

/// Gradient checks run in double precision with central differences at
/// eps = 1e-4 and must stay within 1e-4 relative error.
inline constexpr double kGradEps = 1e-4;
inline constexpr double kGradTol = 1e-4;

struct CheckItem {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = kGradTol;
  bool passed() const { return max_rel_err <= tolerance; }
};

namespace detail {

/// Scalarizes an op output with fixed random weights so every output element
/// contributes a distinct upstream gradient.
inline Tensor<double> pin(const Tensor<double>& y, const Tensor<double>& w, Tape<double>* tape) {
  return sum_all(mul(y, w, tape), tape);
}

/// Uniform values bounded away from zero (for kinked ops).
inline Tensor<double> away_from_zero(Rng& rng, Shape shape, double lo = 0.25) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    t[i] = (u < 0 ? -1.0 : 1.0) * (lo + (1.0 - lo) * std::abs(u));
  }
  return t;
}

}  // namespace detail

/// Per-op finite-difference checks over the whole differentiable op set.
inline std::vector<CheckItem> gradcheck_ops(uint64_t seed) {
  using Tsr = Tensor<double>;
  std::vector<CheckItem> items;
  Rng rng(seed);

  auto run = [&](const std::string& name, std::vector<Tsr*> inputs,
                 std::function<Tsr(Tape<double>*)> f) {
    items.push_back(CheckItem{name, grad_check<double>(f, std::move(inputs), kGradEps)});
  };

  {
    Tsr a = rng.uniform_tensor<double>({2, 3}, -1, 1), b = rng.uniform_tensor<double>({2, 3}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 3}, -1, 1);
    run("add", {&a, &b}, [&](Tape<double>* t) { return detail::pin(add(a, b, t), w, t); });
    run("sub", {&a, &b}, [&](Tape<double>* t) { return detail::pin(sub(a, b, t), w, t); });
    run("mul", {&a, &b}, [&](Tape<double>* t) { return detail::pin(mul(a, b, t), w, t); });
    run("scale", {&a}, [&](Tape<double>* t) { return detail::pin(scale(a, 1.7, t), w, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({3, 4}, -2, 2);
    Tsr xr = detail::away_from_zero(rng, {3, 4});
    Tsr xp = rng.uniform_tensor<double>({3, 4}, 0.5, 2.0);
    Tsr w = rng.uniform_tensor<double>({3, 4}, -1, 1);
    run("sigmoid", {&x}, [&](Tape<double>* t) { return detail::pin(sigmoid(x, t), w, t); });
    run("tanh", {&x}, [&](Tape<double>* t) { return detail::pin(tanh_act(x, t), w, t); });
    run("relu", {&xr}, [&](Tape<double>* t) { return detail::pin(relu(xr, t), w, t); });
    run("log", {&xp},
        [&](Tape<double>* t) { return detail::pin(elementwise(Act::Log, xp, t), w, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 5, 3}, -2, 2);
    Tsr w = rng.uniform_tensor<double>({2, 5, 3}, -1, 1);
    run("softmax", {&x}, [&](Tape<double>* t) { return detail::pin(softmax(x, 1, t), w, t); });
  }
  {
    // Softmax cross-entropy composite.
    Tsr logits = rng.uniform_tensor<double>({2, 7}, -2, 2);
    Tsr target = Tsr::zeros({2, 7});
    target[3] = 1.0;
    target[7 + 5] = 1.0;
    run("softmax_cross_entropy", {&logits}, [&](Tape<double>* t) {
      Tsr probs = softmax(logits, 1, t);
      Tsr nll = mul(target, elementwise(Act::Log, probs, t), t);
      return scale(sum_all(nll, t), -1.0, t);
    });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 2, 3, 3}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 2, 5, 6}, -1, 1);
    run("pad2d", {&x},
        [&](Tape<double>* t) { return detail::pin(pad2d(x, 1, 2, 1, 1, t), w, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 3, 4, 4}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 3, 1, 1}, -1, 1);
    run("global_avg_pool", {&x},
        [&](Tape<double>* t) { return detail::pin(global_avg_pool(x, t), w, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({3, 4}, -1, 1);
    Tsr m = rng.uniform_tensor<double>({2, 4}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({3, 2}, -1, 1);
    run("linear", {&x, &m}, [&](Tape<double>* t) { return detail::pin(linear(x, m, t), w, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 8, 2, 3}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 2, 4, 6}, -1, 1);
    Tsr w2 = rng.uniform_tensor<double>({2, 32, 1, 1}, -1, 1);
    run("pixel_shuffle", {&x},
        [&](Tape<double>* t) { return detail::pin(pixel_shuffle(x, 2, t), w, t); });
    Tsr xs = rng.uniform_tensor<double>({2, 8, 2, 2}, -1, 1);
    run("pixel_unshuffle", {&xs},
        [&](Tape<double>* t) { return detail::pin(pixel_unshuffle(xs, 2, t), w2, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({3, 2, 2, 2}, -1, 1);
    Tsr wr = rng.uniform_tensor<double>({1, 2, 2, 2}, -1, 1);
    Tsr wc = rng.uniform_tensor<double>({3, 1, 2, 2}, -1, 1);
    Tsr wt = rng.uniform_tensor<double>({6, 2, 2, 2}, -1, 1);
    run("slice_rows", {&x},
        [&](Tape<double>* t) { return detail::pin(slice_rows(x, 1, 1, t), wr, t); });
    run("slice_channels", {&x},
        [&](Tape<double>* t) { return detail::pin(slice_channels(x, 0, 1, t), wc, t); });
    run("repeat_rows", {&x},
        [&](Tape<double>* t) { return detail::pin(repeat_rows(x, 2, t), wt, t); });
  }
  {
    Tsr a = rng.uniform_tensor<double>({2, 1, 2, 2}, -1, 1);
    Tsr b = rng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 3, 2, 2}, -1, 1);
    run("concat_channels", {&a, &b}, [&](Tape<double>* t) {
      return detail::pin(concat_channels<double>({a, b}, t), w, t);
    });
    Tsr w2 = rng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    run("permute_channels", {&b}, [&](Tape<double>* t) {
      return detail::pin(permute_channels(b, {1, 0}, t), w2, t);
    });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 2, 4, 4}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    run("stride_slice", {&x},
        [&](Tape<double>* t) { return detail::pin(stride_slice(x, 2, t), w, t); });
    Tsr wcs = rng.uniform_tensor<double>({2, 1, 4, 4}, -1, 1);
    run("channel_sum", {&x},
        [&](Tape<double>* t) { return detail::pin(channel_sum(x, t), wcs, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 3, 2, 2}, -1, 1);
    Tsr s = rng.uniform_tensor<double>({2, 3}, -1, 1);
    Tsr s1 = rng.uniform_tensor<double>({2, 1}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 3, 2, 2}, -1, 1);
    run("depthwise_scale_per_sample", {&x, &s},
        [&](Tape<double>* t) { return detail::pin(depthwise_scale_per_sample(x, s, t), w, t); });
    run("depthwise_scale_per_sample_shared", {&x, &s1},
        [&](Tape<double>* t) { return detail::pin(depthwise_scale_per_sample(x, s1, t), w, t); });
    Tsr pw = rng.uniform_tensor<double>({2, 4, 3}, -1, 1);
    Tsr wp = rng.uniform_tensor<double>({2, 4, 2, 2}, -1, 1);
    run("pointwise_conv_per_sample", {&x, &pw},
        [&](Tape<double>* t) { return detail::pin(pointwise_conv_per_sample(x, pw, t), wp, t); });
  }
  {
    Tsr x = rng.uniform_tensor<double>({2, 2, 4, 4}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    run("max_pool_2x2", {&x}, [&](Tape<double>* t) {
      return detail::pin(max_pool_2x2(x, t).output, w, t);
    });
    auto pooled = max_pool_2x2(x);
    Tsr p = pooled.output.clone();
    auto idx = pooled.indices;
    Tsr wu = rng.uniform_tensor<double>({2, 2, 4, 4}, -1, 1);
    run("max_unpool_2x2", {&p}, [&, idx](Tape<double>* t) {
      return detail::pin(max_unpool_2x2(p, idx, t), wu, t);
    });
  }
  {
    Tsr x = rng.uniform_tensor<double>({1, 2, 4, 4}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({1, 8, 4}, -1, 1);
    run("unfold", {&x}, [&](Tape<double>* t) { return detail::pin(unfold(x, 2, 2, 0, t), w, t); });
    Tsr cols = rng.uniform_tensor<double>({1, 8, 4}, -1, 1);
    Tsr wf = rng.uniform_tensor<double>({1, 2, 4, 4}, -1, 1);
    run("fold", {&cols},
        [&](Tape<double>* t) { return detail::pin(fold(cols, 2, 4, 4, 2, 2, 0, t), wf, t); });
  }
  {
    Tsr a = detail::away_from_zero(rng, {3, 3});
    Tsr b = Tsr::zeros({3, 3});
    run("sum_all", {&a}, [&](Tape<double>* t) { return sum_all(a, t); });
    run("mean_all", {&a}, [&](Tape<double>* t) { return mean_all(a, t); });
    run("l1_loss", {&a}, [&](Tape<double>* t) { return l1_loss(a, b, t); });
  }
  {
    ConvSpec spec{.out_channels = 4, .in_channels = 3, .kernel_h = 3, .kernel_w = 3, .stride = 1,
                  .pad = 1, .groups = 1, .has_bias = true};
    Tsr x = rng.uniform_tensor<double>({2, 3, 5, 5}, -1, 1);
    Tsr w = rng.uniform_tensor<double>(spec.weight_shape(), -1, 1);
    Tsr b = rng.uniform_tensor<double>({4}, -1, 1);
    Tsr pw = rng.uniform_tensor<double>({2, 4, 5, 5}, -1, 1);
    run("conv2d", {&x, &w, &b}, [&](Tape<double>* t) {
      return detail::pin(conv2d(x, spec, w, &b, t), pw, t);
    });
    ConvSpec dw{.out_channels = 3, .in_channels = 3, .kernel_h = 2, .kernel_w = 2, .stride = 2,
                .pad = 0, .groups = 3, .has_bias = false};
    Tsr wd = rng.uniform_tensor<double>(dw.weight_shape(), -1, 1);
    Tsr pwd = rng.uniform_tensor<double>({2, 3, 3, 3}, -1, 1);
    run("conv2d_depthwise_strided", {&x, &wd}, [&](Tape<double>* t) {
      Tsr xx = slice_channels(x, 0, 3, t);
      Tsr padded = pad2d(xx, 0, 0, 1, 1, t);  // 5 -> 6, exact stride-2 windows
      return detail::pin(conv2d(padded, dw, wd, nullptr, t), pwd, t);
    });
  }
  {
    Tsr x = rng.uniform_tensor<double>({1, 2, 3, 3}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 3, 4, 4}, -1, 1);
    Tsr pw = rng.uniform_tensor<double>({1, 3, 6, 6}, -1, 1);
    run("conv_transpose2d", {&x, &w}, [&](Tape<double>* t) {
      return detail::pin(conv_transpose2d(x, w, 2, 1, nullptr, t), pw, t);
    });
  }
  {
    Tsr x = rng.uniform_tensor<double>({3, 2, 3, 3}, -1, 1);
    Tsr gamma = rng.uniform_tensor<double>({2}, 0.5, 1.5);
    Tsr beta = rng.uniform_tensor<double>({2}, -0.5, 0.5);
    Tsr w = rng.uniform_tensor<double>({3, 2, 3, 3}, -1, 1);
    run("batchnorm2d_train", {&x, &gamma, &beta}, [&](Tape<double>* t) {
      BnState<double> st;
      st.init(2);
      return detail::pin(batchnorm2d(x, gamma, beta, st, true, t), w, t);
    });
    BnState<double> st;
    st.init(2);
    st.running_mean = rng.uniform_tensor<double>({2}, -0.5, 0.5);
    st.running_var = rng.uniform_tensor<double>({2}, 0.5, 1.5);
    run("batchnorm2d_infer", {&x, &gamma, &beta}, [&, st](Tape<double>* t) mutable {
      return detail::pin(batchnorm2d(x, gamma, beta, st, false, t), w, t);
    });
  }
  {
    Tsr src = rng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    Tsr w = rng.uniform_tensor<double>({2, 2, 4, 4}, -1, 1);
    run("upsample_nearest", {&src},
        [&](Tape<double>* t) { return detail::pin(upsample_nearest(src, 2, t), w, t); });
    run("bilinear_resize", {&src},
        [&](Tape<double>* t) { return detail::pin(bilinear_resize(src, 4, 4, t), w, t); });
  }
  {
    // Kernel application, both directions plus the s = 1 gate.
    Rng krng(seed + 1);
    Tsr src = krng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    Tsr ker = krng.uniform_tensor<double>({2, 9, 4, 4}, -1, 1);
    Tsr w = krng.uniform_tensor<double>({2, 2, 4, 4}, -1, 1);
    run("apply_kernel_map_up", {&src, &ker}, [&](Tape<double>* t) {
      KernelMap<double> km{ker, 3, 2, KernelDir::Up, false};
      return detail::pin(apply_kernel_map(src, km, t), w, t);
    });
    Tsr ker1 = krng.uniform_tensor<double>({2, 1, 4, 4}, -1, 1);
    run("apply_kernel_map_up_s1", {&src, &ker1}, [&](Tape<double>* t) {
      KernelMap<double> km{ker1, 1, 2, KernelDir::Up, false};
      return detail::pin(apply_kernel_map(src, km, t), w, t);
    });
    Tsr hi = krng.uniform_tensor<double>({2, 2, 4, 4}, -1, 1);
    Tsr kerd = krng.uniform_tensor<double>({2, 16, 2, 2}, -1, 1);
    Tsr wd = krng.uniform_tensor<double>({2, 2, 2, 2}, -1, 1);
    run("apply_kernel_map_down", {&hi, &kerd}, [&](Tape<double>* t) {
      KernelMap<double> km{kerd, 4, 2, KernelDir::Down, false};
      return detail::pin(apply_kernel_map(hi, km, t), wd, t);
    });
  }
  {
    // Generators of the reference learned upsamplers.
    Tsr dec = rng.uniform_tensor<double>({2, 3, 2, 2}, -1, 1);
    Tsr cw = rng.uniform_tensor<double>({16, 3, 3, 3}, -0.5, 0.5);
    Tsr w = rng.uniform_tensor<double>({2, 4, 4, 4}, -1, 1);
    run("carafe_generate", {&dec, &cw}, [&](Tape<double>* t) {
      KernelMap<double> km = carafe_generate(dec, cw, 2, 3, 2, t);
      return detail::pin(km.kernels, w, t);
    });
    Tsr enc = rng.uniform_tensor<double>({2, 3, 4, 4}, -1, 1);
    Tsr iw = rng.uniform_tensor<double>({4, 3, 4, 4}, -0.5, 0.5);
    Tsr wup = rng.uniform_tensor<double>({2, 1, 4, 4}, -1, 1);
    run("indexnet_generate", {&enc, &iw}, [&](Tape<double>* t) {
      IndexMaps<double> maps = indexnet_generate(enc, iw, 4, 2, t);
      Tsr up = detail::pin(maps.up.kernels, wup, t);
      Tsr down = sum_all(maps.down.kernels, t);
      return add(up, down, t);
    });
  }
  return items;
}

/// End-to-end generate -> apply pipelines over the variant matrix.
inline std::vector<CheckItem> gradcheck_a2u(uint64_t seed) {
  using Tsr = Tensor<double>;
  std::vector<CheckItem> items;

  auto run_variant = [&](const std::string& name, A2UConfig cfg, bool check_down) {
    Rng rng(seed + std::hash<std::string>{}(name) % 1000);
    const int c = 3, h = 4, w = 4;
    A2UParams<double> params = make_a2u_params<double>(cfg, c, rng);
    ParamRegistry<double> reg;
    params.register_params(reg, "a2u");
    Tsr x = rng.uniform_tensor<double>({2, c, h, w}, -1, 1);
    Tsr src = rng.uniform_tensor<double>({2, c, h / cfg.ratio, w / cfg.ratio}, -1, 1);
    Tsr pin_up = rng.uniform_tensor<double>({2, c, h, w}, -1, 1);
    Tsr pin_dn = rng.uniform_tensor<double>({2, c, h / cfg.ratio, w / cfg.ratio}, -1, 1);

    std::vector<Tsr*> inputs{&x, &src};
    for (auto& e : reg.entries()) {
      if (e.trainable) inputs.push_back(&e.tensor);
    }
    auto f = [&](Tape<double>* t) -> Tsr {
      KernelMap<double> km = a2u_generate(x, x, params, cfg, t, nullptr, true);
      Tsr up = detail::pin(apply_kernel_map(src, km, t), pin_up, t);
      if (!check_down) return up;
      KernelMap<double> kd = a2u_downsample_generate(x, params, cfg, t, true);
      Tsr dn = detail::pin(apply_kernel_map(x, kd, t), pin_dn, t);
      return add(up, dn, t);
    };
    items.push_back(CheckItem{name, grad_check<double>(f, inputs, kGradEps)});
  };

  A2UConfig base;
  base.k_en = 3;
  base.s_u = 3;
  base.ratio = 2;
  for (auto mode : {A2UMode::Static, A2UMode::Hybrid, A2UMode::Dynamic}) {
    for (auto ch : {ChannelScheme::Wise, ChannelScheme::Shared}) {
      A2UConfig cfg = base;
      cfg.mode = mode;
      cfg.channel = ch;
      std::string name = std::string("a2u_") +
                         (mode == A2UMode::Static   ? "static"
                          : mode == A2UMode::Hybrid ? "hybrid"
                                                    : "dynamic") +
                         (ch == ChannelScheme::Wise ? "_cw" : "_cs");
      run_variant(name, cfg, false);
    }
  }
  {
    A2UConfig cfg = base;
    cfg.pointwise = true;
    cfg.k_en = 4;
    cfg.s_u = 1;
    run_variant("a2u_static_pw_cw_s1", cfg, false);
  }
  {
    A2UConfig cfg = base;
    cfg.normalization = KernelNorm::Softmax;
    run_variant("a2u_static_cw_softmax", cfg, false);
  }
  {
    A2UConfig cfg = base;
    cfg.mode = A2UMode::Dynamic;
    cfg.channel = ChannelScheme::Shared;
    cfg.paired_down = true;
    cfg.s_d = 4;
    run_variant("a2u_dynamic_cs_paired_down", cfg, true);
  }
  {
    A2UConfig cfg = base;
    cfg.encoder_norm_nonlin = true;
    run_variant("a2u_static_cw_enc_norm", cfg, false);
  }
  {
    A2UConfig cfg = base;
    cfg.rank = 2;
    run_variant("a2u_static_cw_rank2", cfg, false);
  }
  return items;
}

}  // namespace a2u::verify

#endif  // A2U_VERIFY_HPP_
