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

#include <gtest/gtest.h>

#include "a2u/a2u.hpp"
#include "a2u_checks.hpp"
#include "reference.hpp"

namespace a2u {
namespace {

A2UConfig toy_cfg() {
  // The reconstruction-experiment setting: static pointwise channel-wise,
  // s_u = 1, k_en = 4.
  A2UConfig cfg;
  cfg.mode = A2UMode::Static;
  cfg.channel = ChannelScheme::Wise;
  cfg.pointwise = true;
  cfg.k_en = 4;
  cfg.s_u = 1;
  cfg.ratio = 2;
  return cfg;
}

// ---------------------------------------------------------------------------
// bilinear_oracle
// ---------------------------------------------------------------------------

TEST(BilinearOracle, IdentityAffinityGivesSquaredNorm) {
  Rng rng(1);
  const int c = 3, n = 4;
  Tensor<double> x = rng.uniform_tensor<double>({c, n}, -1, 1);
  Tensor<double> a = Tensor<double>::zeros({c, n, n});
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < n; ++i) a[(k * n + i) * n + i] = 1.0;
  double want = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) want += x[i] * x[i];
  EXPECT_NEAR(bilinear_oracle(x, x, a), want, 1e-12);
}

TEST(BilinearOracle, ZeroAffinityGivesZero) {
  Rng rng(2);
  Tensor<double> x = rng.uniform_tensor<double>({2, 3}, -1, 1);
  Tensor<double> y = rng.uniform_tensor<double>({2, 5}, -1, 1);
  Tensor<double> a = Tensor<double>::zeros({2, 3, 5});
  EXPECT_EQ(bilinear_oracle(x, y, a), 0.0);
}

TEST(BilinearOracle, MatchesFullExpansion) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> x = rng.uniform_tensor<double>({3, 4}, -1, 1);
    Tensor<double> y = rng.uniform_tensor<double>({3, 4}, -1, 1);
    Tensor<double> a = rng.uniform_tensor<double>({3, 4, 4}, -1, 1);
    EXPECT_NEAR(bilinear_oracle(x, y, a), ref::bilinear_expansion(x, y, a), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// a2u_generate
// ---------------------------------------------------------------------------

TEST(A2uGenerate, ZeroWeightsGiveUniformKernels) {
  for (auto norm : {KernelNorm::SigmoidSoftmax, KernelNorm::Softmax}) {
    A2UConfig cfg;
    cfg.mode = A2UMode::Static;
    cfg.channel = ChannelScheme::Wise;
    cfg.s_u = 3;
    cfg.k_en = 4;
    cfg.ratio = 2;
    cfg.normalization = norm;
    Rng rng(4);
    A2UParams<float> params = make_a2u_params<float>(cfg, 3, rng);
    for (auto* t : {&params.u, &params.v, &params.p}) {
      std::fill(t->data(), t->data() + t->size(), 0.0f);
    }
    Tensor<float> x = rng.uniform_tensor<float>({2, 3, 4, 4}, -1, 1);
    KernelMap<float> km = a2u_generate(x, x, params, cfg);
    EXPECT_TRUE(km.normalized);
    for (int64_t i = 0; i < km.kernels.size(); ++i)
      EXPECT_NEAR(km.kernels[i], 1.0f / 9.0f, 1e-6);
  }
}

TEST(A2uGenerate, RawLogitsAreBilinearInThePairing) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Static;
  cfg.channel = ChannelScheme::Wise;
  cfg.s_u = 3;
  cfg.k_en = 4;
  cfg.ratio = 2;
  Rng rng(5);
  A2UParams<double> params = make_a2u_params<double>(cfg, 3, rng);
  Tensor<double> x = rng.uniform_tensor<double>({1, 3, 4, 4}, -1, 1);
  const double alpha = 1.7, beta = -0.6;
  Tensor<double> ax = x.clone(), bx = x.clone();
  for (int64_t i = 0; i < x.size(); ++i) {
    ax[i] *= alpha;
    bx[i] *= beta;
  }
  Tensor<double> base = a2u_generate_logits(x, x, params, cfg);
  Tensor<double> scaled = a2u_generate_logits(ax, bx, params, cfg);
  for (int64_t i = 0; i < base.size(); ++i)
    EXPECT_NEAR(scaled[i], alpha * beta * base[i], 1e-9);
}

TEST(A2uGenerate, FactorizationMatchesBilinearOracle) {
  auto res = checks::factorization_identity_check(42, 100);
  EXPECT_EQ(res.instances, 100);
  EXPECT_LT(res.max_abs_err, 1e-6);
}

TEST(A2uGenerate, FirstOrderReductionMatchesIndexGenerator) {
  auto res = checks::first_order_reduction_check(7);
  EXPECT_LT(res.superposition_err, 1e-5);
  EXPECT_LT(res.indexnet_err, 1e-6);
}

TEST(A2uGenerate, ToyConfigEmitsSigmoidGates) {
  Rng rng(6);
  A2UConfig cfg = toy_cfg();
  A2UParams<float> params = make_a2u_params<float>(cfg, 4, rng);
  Tensor<float> x = rng.uniform_tensor<float>({2, 4, 6, 6}, -1, 1);
  KernelMap<float> km = a2u_generate(x, x, params, cfg);
  EXPECT_EQ(km.s, 1);
  ASSERT_EQ(km.kernels.shape(), (Shape{2, 1, 6, 6}));
  for (int64_t i = 0; i < km.kernels.size(); ++i) {
    EXPECT_GT(km.kernels[i], 0.0f);
    EXPECT_LT(km.kernels[i], 1.0f);
  }
}

TEST(A2uGenerate, ArgmaxStableUnderPositiveProjectionScaling) {
  for (auto norm : {KernelNorm::SigmoidSoftmax, KernelNorm::Softmax}) {
    A2UConfig cfg;
    cfg.mode = A2UMode::Static;
    cfg.channel = ChannelScheme::Wise;
    cfg.s_u = 3;
    cfg.k_en = 2;
    cfg.ratio = 2;
    cfg.normalization = norm;
    Rng rng(8);
    A2UParams<double> params = make_a2u_params<double>(cfg, 3, rng);
    Tensor<double> x = rng.uniform_tensor<double>({1, 3, 4, 4}, -1, 1);
    KernelMap<double> k1 = a2u_generate(x, x, params, cfg);
    for (int64_t i = 0; i < params.p.size(); ++i) params.p[i] *= 3.5;
    KernelMap<double> k2 = a2u_generate(x, x, params, cfg);
    const int64_t s2 = k1.kernels.dim(1), hw = k1.kernels.dim(2) * k1.kernels.dim(3);
    for (int64_t p = 0; p < hw; ++p) {
      int64_t arg1 = 0, arg2 = 0;
      for (int64_t e = 1; e < s2; ++e) {
        if (k1.kernels[e * hw + p] > k1.kernels[arg1 * hw + p]) arg1 = e;
        if (k2.kernels[e * hw + p] > k2.kernels[arg2 * hw + p]) arg2 = e;
      }
      EXPECT_EQ(arg1, arg2);
    }
  }
}

// ---------------------------------------------------------------------------
// dynamic weights
// ---------------------------------------------------------------------------

TEST(A2uDynamicWeights, LinearInConstantInput) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Dynamic;
  cfg.channel = ChannelScheme::Shared;
  cfg.s_u = 3;
  cfg.ratio = 2;
  Rng rng(9);
  A2UParams<double> params = make_a2u_params<double>(cfg, 3, rng);
  Tensor<double> x1 = Tensor<double>::full({1, 3, 4, 4}, 0.7);
  Tensor<double> x2 = Tensor<double>::full({1, 3, 4, 4}, 1.4);
  auto w1 = a2u_generate_dynamic_weights(x1, params, cfg);
  auto w2 = a2u_generate_dynamic_weights(x2, params, cfg);
  for (int64_t i = 0; i < w1.p.size(); ++i) EXPECT_NEAR(w2.p[i], 2.0 * w1.p[i], 1e-12);
  for (int64_t i = 0; i < w1.u.size(); ++i) EXPECT_NEAR(w2.u[i], 2.0 * w1.u[i], 1e-12);
}

TEST(A2uDynamicWeights, ZeroGeneratorsGiveUniformKernels) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Hybrid;
  cfg.channel = ChannelScheme::Wise;
  cfg.s_u = 3;
  cfg.k_en = 4;
  cfg.ratio = 2;
  Rng rng(10);
  A2UParams<float> params = make_a2u_params<float>(cfg, 3, rng);
  std::fill(params.wp.data(), params.wp.data() + params.wp.size(), 0.0f);
  Tensor<float> x = rng.uniform_tensor<float>({1, 3, 4, 4}, -1, 1);
  KernelMap<float> km = a2u_generate(x, x, params, cfg);
  for (int64_t i = 0; i < km.kernels.size(); ++i) EXPECT_NEAR(km.kernels[i], 1.0f / 9.0f, 1e-6);
}

TEST(A2uDynamicWeights, IdenticalSamplesGetIdenticalWeights) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Dynamic;
  cfg.channel = ChannelScheme::Wise;
  cfg.s_u = 3;
  cfg.ratio = 2;
  Rng rng(11);
  A2UParams<double> params = make_a2u_params<double>(cfg, 3, rng);
  Tensor<double> one = rng.uniform_tensor<double>({1, 3, 4, 4}, -1, 1);
  Tensor<double> batch({2, 3, 4, 4});
  for (int64_t i = 0; i < one.size(); ++i) {
    batch[i] = one[i];
    batch[one.size() + i] = one[i];
  }
  auto w = a2u_generate_dynamic_weights(batch, params, cfg);
  const int64_t half_p = w.p.size() / 2;
  for (int64_t i = 0; i < half_p; ++i) EXPECT_EQ(w.p[i], w.p[half_p + i]);
  const int64_t half_u = w.u.size() / 2;
  for (int64_t i = 0; i < half_u; ++i) EXPECT_EQ(w.u[i], w.u[half_u + i]);
  EXPECT_THROW(a2u_generate_dynamic_weights(batch, params, A2UConfig{}), CheckError);
}

// ---------------------------------------------------------------------------
// downsampling
// ---------------------------------------------------------------------------

TEST(A2uDownsample, ZeroProjectionGivesUniformKernels) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Static;
  cfg.channel = ChannelScheme::Wise;
  cfg.s_u = 1;
  cfg.k_en = 4;
  cfg.ratio = 2;
  cfg.paired_down = true;  // default side r^2 * s_u = 4
  Rng rng(12);
  A2UParams<float> params = make_a2u_params<float>(cfg, 3, rng);
  std::fill(params.p_down.data(), params.p_down.data() + params.p_down.size(), 0.0f);
  Tensor<float> x = rng.uniform_tensor<float>({1, 3, 8, 8}, -1, 1);
  KernelMap<float> km = a2u_downsample_generate(x, params, cfg);
  EXPECT_EQ(km.s, 4);
  EXPECT_EQ(km.direction, KernelDir::Down);
  ASSERT_EQ(km.kernels.shape(), (Shape{1, 16, 4, 4}));
  for (int64_t i = 0; i < km.kernels.size(); ++i) EXPECT_NEAR(km.kernels[i], 1.0f / 16.0f, 1e-6);
}

TEST(A2uDownsample, ConstantInputStaysConstant) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Dynamic;
  cfg.channel = ChannelScheme::Shared;
  cfg.s_u = 3;
  cfg.ratio = 2;
  cfg.paired_down = true;
  cfg.s_d = 4;
  Rng rng(13);
  A2UParams<float> params = make_a2u_params<float>(cfg, 2, rng);
  Tensor<float> x = Tensor<float>::full({1, 2, 8, 8}, 0.37f);
  KernelMap<float> km = a2u_downsample_generate(x, params, cfg);
  Tensor<float> y = apply_kernel_map(x, km);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 4, 4}));
  // Interior positions see a full window; border windows are zero-padded and
  // shrink the convex mass, so check interior only.
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t i = 1; i < 3; ++i)
      for (int64_t j = 1; j < 3; ++j) EXPECT_NEAR(y.at4(0, c, i, j), 0.37f, 1e-5);
}

TEST(A2uDownsample, UniformKernelsAtRatioSideEqualAveragePooling) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Static;
  cfg.channel = ChannelScheme::Shared;
  cfg.s_u = 1;
  cfg.k_en = 2;
  cfg.ratio = 2;
  cfg.paired_down = true;
  cfg.s_d = 2;  // window side equals the ratio: exact block aggregation
  Rng rng(14);
  A2UParams<double> params = make_a2u_params<double>(cfg, 3, rng);
  std::fill(params.p_down.data(), params.p_down.data() + params.p_down.size(), 0.0);
  Tensor<double> x = rng.uniform_tensor<double>({2, 3, 6, 6}, -1, 1);
  KernelMap<double> km = a2u_downsample_generate(x, params, cfg);
  Tensor<double> y = apply_kernel_map(x, km);
  Tensor<double> want = ref::avg_pool(x, 2);
  ASSERT_EQ(y.shape(), want.shape());
  for (int64_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-9);
}

// ---------------------------------------------------------------------------
// parameter counts
// ---------------------------------------------------------------------------

int64_t instantiated_count(const A2UConfig& cfg, int c) {
  Rng rng(99);
  A2UParams<float> params = make_a2u_params<float>(cfg, c, rng);
  ParamRegistry<float> reg;
  params.register_params(reg, "a2u");
  return reg.count_params();
}

TEST(A2uParamCount, PublishedClosedForms) {
  A2UConfig cfg;
  cfg.mode = A2UMode::Static;
  cfg.channel = ChannelScheme::Wise;
  cfg.s_u = 3;
  cfg.k_en = 5;
  EXPECT_EQ(a2u_param_count(cfg, 64), 3236);  // 4*9 + 2*25*64

  A2UConfig dyn;
  dyn.mode = A2UMode::Dynamic;
  dyn.channel = ChannelScheme::Shared;
  dyn.s_u = 3;
  EXPECT_EQ(a2u_param_count(dyn, 64), 2432);  // 36*64 + 2*64
}

TEST(A2uParamCount, FormulaEqualsInstantiatedRegistry) {
  std::vector<A2UConfig> cfgs;
  for (auto mode : {A2UMode::Static, A2UMode::Hybrid, A2UMode::Dynamic})
    for (auto ch : {ChannelScheme::Wise, ChannelScheme::Shared}) {
      A2UConfig cfg;
      cfg.mode = mode;
      cfg.channel = ch;
      cfg.s_u = 3;
      cfg.k_en = 5;
      cfgs.push_back(cfg);
    }
  {
    A2UConfig pw;
    pw.mode = A2UMode::Static;
    pw.channel = ChannelScheme::Wise;
    pw.pointwise = true;
    pw.s_u = 1;
    pw.k_en = 4;
    cfgs.push_back(pw);  // 4*2*16*C + 1
  }
  {
    A2UConfig paired;
    paired.mode = A2UMode::Dynamic;
    paired.channel = ChannelScheme::Shared;
    paired.s_u = 3;
    paired.paired_down = true;  // adds s_d^2 * C with s_d = 12
    cfgs.push_back(paired);
  }
  {
    A2UConfig enc;
    enc.mode = A2UMode::Static;
    enc.channel = ChannelScheme::Wise;
    enc.s_u = 3;
    enc.k_en = 5;
    enc.encoder_norm_nonlin = true;
    cfgs.push_back(enc);
  }
  for (const auto& cfg : cfgs) {
    for (int c : {3, 16, 64}) {
      EXPECT_EQ(a2u_param_count(cfg, c), instantiated_count(cfg, c))
          << "mode=" << int(cfg.mode) << " channel=" << int(cfg.channel) << " C=" << c;
    }
  }
  EXPECT_THROW(a2u_param_count(A2UConfig{.rank = 2, .k_en = 3}, 8), CheckError);
}

TEST(A2uConfig, ValidatesVariantMatrix) {
  A2UConfig bad_rank;
  bad_rank.rank = 10;
  bad_rank.k_en = 3;
  EXPECT_THROW(bad_rank.validate(), CheckError);

  A2UConfig pw_dynamic;
  pw_dynamic.mode = A2UMode::Dynamic;
  pw_dynamic.pointwise = true;
  EXPECT_THROW(pw_dynamic.validate(), CheckError);

  A2UConfig small_kernel;
  small_kernel.k_en = 1;
  small_kernel.ratio = 2;
  EXPECT_THROW(small_kernel.validate(), CheckError);

  A2UConfig ok = toy_cfg();
  EXPECT_NO_THROW(ok.validate());
}

// ---------------------------------------------------------------------------
// normalization invariant (reduced sweep; the acceptance suite runs 10^4)
// ---------------------------------------------------------------------------

TEST(A2uNormalization, SweepHoldsOnReducedSample) {
  auto sweep = checks::normalization_sweep(2024, 300);
  EXPECT_EQ(sweep.generations, 300);
  EXPECT_GE(sweep.min_value, 0.0);
  EXPECT_LE(sweep.worst_sum_dev, 1e-5);
  EXPECT_TRUE(sweep.s1_in_unit_interval);
}

}  // namespace
}  // namespace a2u
