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

#include <algorithm>
#include <cmath>

#include "a2u/conv.hpp"
#include "a2u/ops.hpp"
#include "a2u/rng.hpp"
#include "reference.hpp"

namespace a2u {
namespace {

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

TEST(Conv2d, BoxSumByHand) {
  // All-ones 3x3 input and kernel with pad 1: center sums the full box.
  Tensor<float> x = Tensor<float>::ones({1, 1, 3, 3});
  Tensor<float> w = Tensor<float>::ones({1, 1, 3, 3});
  ConvSpec spec{.out_channels = 1, .in_channels = 1, .kernel_h = 3, .kernel_w = 3, .pad = 1};
  Tensor<float> y = conv2d(x, spec, w);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 1, 1), 9.0f);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 0, 0), 4.0f);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 0, 2), 4.0f);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 2, 0), 4.0f);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 2, 2), 4.0f);
}

TEST(Conv2d, DepthwiseIdentityScaling) {
  const int c = 3;
  Rng rng(5);
  Tensor<float> x = rng.uniform_tensor<float>({2, c, 4, 4}, -1, 1);
  Tensor<float> w({c, 1, 1, 1}, {2.0f, -0.5f, 3.0f});
  ConvSpec spec{.out_channels = c, .in_channels = c, .kernel_h = 1, .kernel_w = 1, .groups = c};
  Tensor<float> y = conv2d(x, spec, w);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j)
          EXPECT_FLOAT_EQ(y.at4(b, cc, i, j), w[cc] * x.at4(b, cc, i, j));
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  // 64-bit mode against the six-nested-loop reference.
  Rng rng(11);
  struct Case {
    ConvSpec spec;
    int h, w;
  };
  const std::vector<Case> cases = {
      {{.out_channels = 4, .in_channels = 3, .kernel_h = 3, .kernel_w = 3, .stride = 1, .pad = 1},
       8, 8},
      {{.out_channels = 2, .in_channels = 3, .kernel_h = 5, .kernel_w = 5, .stride = 1, .pad = 2},
       8, 8},
      {{.out_channels = 6, .in_channels = 6, .kernel_h = 3, .kernel_w = 3, .stride = 2, .pad = 0,
        .groups = 3},
       9, 9},
      {{.out_channels = 4, .in_channels = 4, .kernel_h = 2, .kernel_w = 2, .stride = 2, .pad = 0,
        .groups = 4},
       8, 8},
      {{.out_channels = 5, .in_channels = 3, .kernel_h = 1, .kernel_w = 1, .stride = 1, .pad = 0,
        .has_bias = true},
       8, 8},
  };
  for (const auto& cs : cases) {
    Tensor<double> x = rng.uniform_tensor<double>({2, cs.spec.in_channels, cs.h, cs.w}, -1, 1);
    Tensor<double> w = rng.uniform_tensor<double>(cs.spec.weight_shape(), -1, 1);
    Tensor<double> b = rng.uniform_tensor<double>({cs.spec.out_channels}, -1, 1);
    const Tensor<double>* bias = cs.spec.has_bias ? &b : nullptr;
    Tensor<double> got = conv2d(x, cs.spec, w, bias);
    Tensor<double> want = ref::conv2d(x, cs.spec, w, bias);
    ASSERT_EQ(got.shape(), want.shape());
    for (int64_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(Conv2d, LinearInInputWithoutBias) {
  Rng rng(3);
  ConvSpec spec{.out_channels = 4, .in_channels = 3, .kernel_h = 3, .kernel_w = 3, .pad = 1};
  Tensor<float> w = rng.uniform_tensor<float>(spec.weight_shape(), -1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<float> x1 = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
    Tensor<float> x2 = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
    const float a = static_cast<float>(rng.uniform(-2, 2));
    const float b = static_cast<float>(rng.uniform(-2, 2));
    Tensor<float> mix(x1.shape());
    for (int64_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
    Tensor<float> lhs = conv2d(mix, spec, w);
    Tensor<float> y1 = conv2d(x1, spec, w);
    Tensor<float> y2 = conv2d(x2, spec, w);
    for (int64_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], a * y1[i] + b * y2[i], 1e-5);
  }
}

TEST(Conv2d, GroupedEqualsBlockDiagonalEmbedding) {
  // groups=C result equals groups=1 with a block-diagonal weight matrix.
  Rng rng(17);
  const int c = 4, k = 3;
  Tensor<double> x = rng.uniform_tensor<double>({2, c, 6, 6}, -1, 1);
  Tensor<double> wg = rng.uniform_tensor<double>({c, 1, k, k}, -1, 1);
  ConvSpec gspec{.out_channels = c, .in_channels = c, .kernel_h = k, .kernel_w = k, .pad = 1,
                 .groups = c};
  Tensor<double> dense = Tensor<double>::zeros({c, c, k, k});
  for (int64_t o = 0; o < c; ++o)
    for (int64_t a = 0; a < k * k; ++a) dense[(o * c + o) * k * k + a] = wg[o * k * k + a];
  ConvSpec dspec = gspec;
  dspec.groups = 1;
  Tensor<double> y1 = conv2d(x, gspec, wg);
  Tensor<double> y2 = conv2d(x, dspec, dense);
  for (int64_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y1[i], y2[i], 1e-12);
}

TEST(Conv2d, RejectsBadGeometry) {
  Tensor<float> x = Tensor<float>::ones({1, 2, 6, 6});
  ConvSpec spec{.out_channels = 2, .in_channels = 2, .kernel_h = 3, .kernel_w = 3, .stride = 2,
                .pad = 1};
  // (6 + 2 - 3) = 5 does not divide by 2.
  Tensor<float> w = Tensor<float>::ones(spec.weight_shape());
  EXPECT_THROW(conv2d(x, spec, w), CheckError);
  ConvSpec badc = spec;
  badc.in_channels = 3;
  EXPECT_THROW(conv2d(x, badc, w), CheckError);
}

TEST(ConvTranspose2d, AdjointOfConv2d) {
  // <conv(x), y> == <x, convT(y)> for the same weight tensor.
  Rng rng(23);
  ConvSpec spec{.out_channels = 3, .in_channels = 2, .kernel_h = 4, .kernel_w = 4, .stride = 2,
                .pad = 1};
  Tensor<double> x = rng.uniform_tensor<double>({2, 2, 6, 6}, -1, 1);
  Tensor<double> w = rng.uniform_tensor<double>(spec.weight_shape(), -1, 1);
  Tensor<double> cx = conv2d(x, spec, w);
  Tensor<double> y = rng.uniform_tensor<double>(cx.shape(), -1, 1);
  Tensor<double> ty = conv_transpose2d(y, w, spec.stride, spec.pad);
  ASSERT_EQ(ty.shape(), x.shape());
  double lhs = 0, rhs = 0;
  for (int64_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += x[i] * ty[i];
  EXPECT_NEAR(lhs, rhs, 1e-9);
}

TEST(ConvTranspose2d, SinglePixelPaintsKernel) {
  Tensor<float> x({1, 1, 1, 1}, {2.0f});
  Tensor<float> w({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<float> y = conv_transpose2d(x, w, 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_FLOAT_EQ(y[0], 2.0f);
  EXPECT_FLOAT_EQ(y[1], 4.0f);
  EXPECT_FLOAT_EQ(y[2], 6.0f);
  EXPECT_FLOAT_EQ(y[3], 8.0f);
}

// ---------------------------------------------------------------------------
// unfold / fold
// ---------------------------------------------------------------------------

TEST(Unfold, SingleElementColumns) {
  Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<float> cols = unfold(x, 1, 1, 0);
  ASSERT_EQ(cols.shape(), (Shape{1, 1, 4}));
  for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(cols[i], float(i + 1));
}

TEST(Unfold, PaddingPutsValueAtCenter) {
  Tensor<float> x({1, 1, 1, 1}, {5.0f});
  Tensor<float> cols = unfold(x, 3, 1, 1);
  ASSERT_EQ(cols.shape(), (Shape{1, 9, 1}));
  for (int i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(cols[i], i == 4 ? 5.0f : 0.0f);
}

TEST(Unfold, FoldRoundTripNonOverlapping) {
  Rng rng(9);
  Tensor<float> x = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
  Tensor<float> cols = unfold(x, 2, 2, 0);
  Tensor<float> back = fold(cols, 3, 6, 6, 2, 2, 0);
  ASSERT_EQ(back.shape(), x.shape());
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(back[i], x[i]);
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

TEST(Softmax, UniformOnConstants) {
  Tensor<double> x({3}, {0, 0, 0});
  Tensor<double> y = softmax(x, 0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ClosedFormLogs) {
  Tensor<double> x({3}, {std::log(1.0), std::log(2.0), std::log(3.0)});
  Tensor<double> y = softmax(x, 0);
  EXPECT_NEAR(y[0], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(y[1], 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(y[2], 3.0 / 6.0, 1e-12);
}

TEST(Softmax, MatchesDoubleOracle) {
  Rng rng(21);
  Tensor<double> x = rng.uniform_tensor<double>({9}, -4, 4);
  Tensor<double> y = softmax(x, 0);
  std::vector<double> lane(x.data(), x.data() + 9);
  auto want = ref::softmax_lane(lane);
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> x = rng.uniform_tensor<double>({2, 5, 3}, -6, 6);
    const int axis = static_cast<int>(rng.below(3));
    Tensor<double> y = softmax(x, axis);
    // Sum along axis.
    int64_t outer = 1, inner = 1;
    const int64_t lanes = x.dim(axis);
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) {
        double s = 0;
        for (int64_t l = 0; l < lanes; ++l) s += y[o * lanes * inner + l * inner + in];
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
    // Shift invariance.
    const double c = rng.uniform(-100, 100);
    Tensor<double> xs = x.clone();
    for (int64_t i = 0; i < xs.size(); ++i) xs[i] += c;
    Tensor<double> ys = softmax(xs, axis);
    for (int64_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(ys[i], y[i], 1e-12);
  }
}

// ---------------------------------------------------------------------------
// elementwise / hadamard
// ---------------------------------------------------------------------------

TEST(Elementwise, KnownValues) {
  Tensor<float> x({3}, {0.0f, -3.0f, 2.0f});
  EXPECT_FLOAT_EQ(sigmoid(x)[0], 0.5f);
  EXPECT_FLOAT_EQ(relu(x)[1], 0.0f);
  EXPECT_FLOAT_EQ(relu(x)[2], 2.0f);
  EXPECT_NEAR(tanh_act(x)[2], std::tanh(2.0f), 1e-6);
}

TEST(Hadamard, IdentityAndAnnihilator) {
  Rng rng(2);
  Tensor<float> a = rng.uniform_tensor<float>({2, 3}, -2, 2);
  Tensor<float> ones = Tensor<float>::ones(a.shape());
  Tensor<float> zeros = Tensor<float>::zeros(a.shape());
  Tensor<float> a1 = mul(a, ones);
  Tensor<float> a0 = mul(a, zeros);
  for (int64_t i = 0; i < a.size(); ++i) {
    EXPECT_FLOAT_EQ(a1[i], a[i]);
    EXPECT_FLOAT_EQ(a0[i], 0.0f);
  }
}

TEST(Hadamard, Bilinearity) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<double> a = rng.uniform_tensor<double>({4, 4}, -1, 1);
    Tensor<double> b = rng.uniform_tensor<double>({4, 4}, -1, 1);
    Tensor<double> lhs = mul(scale(a, 2.0), scale(b, 3.0));
    Tensor<double> rhs = scale(mul(a, b), 6.0);
    for (int64_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
  }
}

TEST(Hadamard, ShapeMismatchRejected) {
  Tensor<float> a({2, 2});
  Tensor<float> b({2, 3});
  EXPECT_THROW(mul(a, b), CheckError);
}

// ---------------------------------------------------------------------------
// global_avg_pool
// ---------------------------------------------------------------------------

TEST(GlobalAvgPool, ConstantAndHandValues) {
  Tensor<float> c = Tensor<float>::full({1, 2, 3, 3}, 2.5f);
  Tensor<float> y = global_avg_pool(c);
  EXPECT_FLOAT_EQ(y[0], 2.5f);
  EXPECT_FLOAT_EQ(y[1], 2.5f);

  Tensor<float> x({1, 1, 2, 2}, {1, 3, 5, 7});
  EXPECT_FLOAT_EQ(global_avg_pool(x)[0], 4.0f);
}

TEST(GlobalAvgPool, MatchesDoubleMeanOracle) {
  Rng rng(13);
  Tensor<double> x = rng.uniform_tensor<double>({2, 3, 5, 7}, -10, 10);
  Tensor<double> y = global_avg_pool(x);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t c = 0; c < 3; ++c) {
      Tensor<double> plane({1, 1, 5, 7});
      for (int64_t i = 0; i < 35; ++i) plane[i] = x[(b * 3 + c) * 35 + i];
      EXPECT_NEAR(y[b * 3 + c], ref::mean(plane), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// pixel shuffle
// ---------------------------------------------------------------------------

TEST(PixelShuffle, IdentityAtRatioOne) {
  Rng rng(6);
  Tensor<float> x = rng.uniform_tensor<float>({1, 3, 2, 2}, -1, 1);
  Tensor<float> y = pixel_shuffle(x, 1);
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(y[i], x[i]);
}

TEST(PixelShuffle, DefinitionOnFourChannels) {
  Tensor<float> x({1, 4, 1, 1}, {1, 2, 3, 4});
  Tensor<float> y = pixel_shuffle(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_FLOAT_EQ(y[0], 1);
  EXPECT_FLOAT_EQ(y[1], 2);
  EXPECT_FLOAT_EQ(y[2], 3);
  EXPECT_FLOAT_EQ(y[3], 4);
}

TEST(PixelShuffle, InverseRoundTripAndPermutation) {
  Rng rng(8);
  Tensor<float> x = rng.uniform_tensor<float>({2, 8, 3, 5}, -1, 1);
  Tensor<float> y = pixel_shuffle(x, 2);
  Tensor<float> back = pixel_unshuffle(y, 2);
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(back[i], x[i]);

  // Multiset of values preserved exactly.
  std::vector<float> xs(x.data(), x.data() + x.size());
  std::vector<float> ys(y.data(), y.data() + y.size());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  EXPECT_EQ(xs, ys);
}

TEST(PixelShuffle, ChannelDivisibilityEnforced) {
  Tensor<float> x({1, 3, 2, 2});
  EXPECT_THROW(pixel_shuffle(x, 2), CheckError);
}

// ---------------------------------------------------------------------------
// max pool / unpool
// ---------------------------------------------------------------------------

TEST(MaxPool, RecordsArgmaxAndUnpools) {
  Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto res = max_pool_2x2(x);
  EXPECT_FLOAT_EQ(res.output[0], 4.0f);
  EXPECT_EQ(res.indices.idx[0], 3);
  Tensor<float> up = max_unpool_2x2(res.output, res.indices);
  EXPECT_FLOAT_EQ(up[0], 0);
  EXPECT_FLOAT_EQ(up[1], 0);
  EXPECT_FLOAT_EQ(up[2], 0);
  EXPECT_FLOAT_EQ(up[3], 4.0f);
}

TEST(MaxPool, TiesBreakTowardSmallestFlatIndex) {
  Tensor<float> x({1, 1, 2, 2}, {7, 7, 7, 7});
  auto res = max_pool_2x2(x);
  EXPECT_EQ(res.indices.idx[0], 0);
  Tensor<float> x2({1, 1, 2, 2}, {1, 5, 5, 0});
  EXPECT_EQ(max_pool_2x2(x2).indices.idx[0], 1);
}

TEST(MaxPool, PoolUnpoolIdempotentOnOwnOutput) {
  // Unpool fills the other three slots with zeros, so the round trip is
  // idempotent on nonnegative maps (the post-ReLU domain it is used on).
  Rng rng(19);
  Tensor<float> x = rng.uniform_tensor<float>({2, 3, 4, 6}, 0, 1);
  auto pooled = max_pool_2x2(x);
  Tensor<float> up = max_unpool_2x2(pooled.output, pooled.indices);
  auto pooled2 = max_pool_2x2(up);
  for (int64_t i = 0; i < pooled.output.size(); ++i)
    EXPECT_FLOAT_EQ(pooled2.output[i], pooled.output[i]);
}

TEST(MaxUnpool, RejectsCorruptIndices) {
  Tensor<float> p({1, 1, 1, 1}, {1.0f});
  PoolIndices idx{{1, 1, 1, 1}, {9}};
  EXPECT_THROW(max_unpool_2x2(p, idx), CheckError);
}

// ---------------------------------------------------------------------------
// smaller layout ops
// ---------------------------------------------------------------------------

TEST(Pad2d, AsymmetricPlacement) {
  Tensor<float> x({1, 1, 1, 2}, {1, 2});
  Tensor<float> y = pad2d(x, 1, 2, 0, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 4}));
  EXPECT_FLOAT_EQ(y.at4(0, 0, 1, 2), 1.0f);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 1, 3), 2.0f);
  EXPECT_FLOAT_EQ(y.at4(0, 0, 0, 2), 0.0f);
}

TEST(SliceAndConcat, RoundTrip) {
  Rng rng(12);
  Tensor<float> x = rng.uniform_tensor<float>({1, 5, 2, 2}, -1, 1);
  std::vector<Tensor<float>> parts;
  for (int c = 0; c < 5; ++c) parts.push_back(slice_channels(x, c, 1));
  Tensor<float> back = concat_channels(parts);
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(back[i], x[i]);

  Tensor<float> rows = rng.uniform_tensor<float>({4, 2, 3, 3}, -1, 1);
  Tensor<float> r2 = slice_rows(rows, 2, 1);
  EXPECT_EQ(r2.shape(), (Shape{1, 2, 3, 3}));
  for (int64_t i = 0; i < r2.size(); ++i) EXPECT_FLOAT_EQ(r2[i], rows[2 * 18 + i]);
}

TEST(StrideSlice, PicksTopLeftOfEachBlock) {
  Tensor<float> x({1, 1, 4, 4});
  for (int64_t i = 0; i < 16; ++i) x[i] = float(i);
  Tensor<float> y = stride_slice(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_FLOAT_EQ(y[0], 0);
  EXPECT_FLOAT_EQ(y[1], 2);
  EXPECT_FLOAT_EQ(y[2], 8);
  EXPECT_FLOAT_EQ(y[3], 10);
}

TEST(Linear, MatchesLoopOracle) {
  Rng rng(25);
  Tensor<double> x = rng.uniform_tensor<double>({3, 4}, -1, 1);
  Tensor<double> w = rng.uniform_tensor<double>({2, 4}, -1, 1);
  Tensor<double> y = linear(x, w);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 2; ++j) {
      double acc = 0;
      for (int64_t k = 0; k < 4; ++k) acc += x[i * 4 + k] * w[j * 4 + k];
      EXPECT_NEAR(y[i * 2 + j], acc, 1e-12);
    }
}

TEST(Losses, L1AndReductions) {
  Tensor<float> a({4}, {1, 2, 3, 4});
  Tensor<float> b({4}, {2, 2, 2, 2});
  EXPECT_FLOAT_EQ(l1_loss(a, b)[0], (1 + 0 + 1 + 2) / 4.0f);
  EXPECT_FLOAT_EQ(sum_all(a)[0], 10.0f);
  EXPECT_FLOAT_EQ(mean_all(a)[0], 2.5f);
}

TEST(PerSampleOps, MatchLoopSemantics) {
  Rng rng(33);
  Tensor<double> x = rng.uniform_tensor<double>({2, 3, 2, 2}, -1, 1);
  Tensor<double> s = rng.uniform_tensor<double>({2, 3}, -1, 1);
  Tensor<double> y = depthwise_scale_per_sample(x, s);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t j = 0; j < 4; ++j)
        EXPECT_NEAR(y[(b * 3 + c) * 4 + j], x[(b * 3 + c) * 4 + j] * s[b * 3 + c], 1e-12);

  Tensor<double> shared = rng.uniform_tensor<double>({2, 1}, -1, 1);
  Tensor<double> ys = depthwise_scale_per_sample(x, shared);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t i = 0; i < 12; ++i) EXPECT_NEAR(ys[b * 12 + i], x[b * 12 + i] * shared[b], 1e-12);

  Tensor<double> w = rng.uniform_tensor<double>({2, 4, 3}, -1, 1);
  Tensor<double> pc = pointwise_conv_per_sample(x, w);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t o = 0; o < 4; ++o)
      for (int64_t j = 0; j < 4; ++j) {
        double acc = 0;
        for (int64_t i = 0; i < 3; ++i) acc += w[(b * 4 + o) * 3 + i] * x[(b * 3 + i) * 4 + j];
        EXPECT_NEAR(pc[(b * 4 + o) * 4 + j], acc, 1e-12);
      }
}

}  // namespace
}  // namespace a2u
