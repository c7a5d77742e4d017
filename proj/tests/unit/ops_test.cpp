// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "mcdk/core/ops.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

namespace mcdk {
namespace {

using testing::check_gradients;
using testing::random_tensor;

constexpr double kOpEps = 1e-3;
constexpr double kTol = 1e-3;

// Values in [-1,-0.05] U [0.05,1], away from the kinks of relu and abs.
Tensor<double> away_from_zero(Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.mutable_data()) {
    v = rng.uniform(0.05, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  }
  return t;
}

// Direct nested-loop cross-correlation used as the convolution oracle.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w,
                           const Tensor<double>& b, Index stride, Index pad_h, Index pad_w,
                           Index groups) {
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Index O = w.dim(0), cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const Index oh = (H + 2 * pad_h - kh) / stride + 1, ow = (W + 2 * pad_w - kw) / stride + 1;
  const Index og = O / groups;
  Tensor<double> out(Shape{B, O, oh, ow});
  for (Index n = 0; n < B; ++n)
    for (Index o = 0; o < O; ++o)
      for (Index y = 0; y < oh; ++y)
        for (Index xx = 0; xx < ow; ++xx) {
          double acc = b.defined() ? b[o] : 0.0;
          const Index g = o / og;
          for (Index c = 0; c < cg; ++c)
            for (Index i = 0; i < kh; ++i)
              for (Index j = 0; j < kw; ++j) {
                const Index iy = y * stride + i - pad_h, ix = xx * stride + j - pad_w;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += w[((o * cg + c) * kh + i) * kw + j] *
                       x[((n * C + g * cg + c) * H + iy) * W + ix];
              }
          out[((n * O + o) * oh + y) * ow + xx] = acc;
        }
  (void)C;
  return out;
}

TEST(Conv2dTest, IdentityKernelReturnsInput) {
  const auto x = Tensor<float>::ones({1, 1, 3, 3});
  const auto w = Tensor<float>::ones({1, 1, 1, 1});
  const auto y = ops::conv2d(x, w, Tensor<float>::zeros({1}), 1, 0, 1);
  ASSERT_EQ(y.shape(), x.shape());
  for (Index i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 1.0f);
}

TEST(Conv2dTest, BoxSumOfOnes) {
  const auto x = Tensor<float>::ones({1, 1, 3, 3});
  const auto w = Tensor<float>::ones({1, 1, 3, 3});
  const auto y = ops::conv2d(x, w, Tensor<float>::zeros({1}), 1, 1, 1);
  EXPECT_EQ(y[4], 9.0f);
  EXPECT_EQ(y[0], 4.0f);
  EXPECT_EQ(y[1], 6.0f);
}

TEST(Conv2dTest, MatchesDirectOracle) {
  Rng rng(1);
  struct Case {
    Index cin, cout, kh, kw, stride, pad_h, pad_w, groups, h, w;
  };
  for (const Case& c : {Case{2, 3, 3, 3, 1, 1, 1, 1, 5, 6}, Case{4, 4, 7, 7, 1, 3, 3, 4, 9, 8},
                        Case{3, 6, 1, 1, 1, 0, 0, 1, 4, 4}, Case{4, 2, 3, 3, 2, 1, 1, 2, 7, 7},
                        Case{2, 2, 5, 1, 1, 2, 0, 1, 6, 3}}) {
    const auto x = random_tensor<double>({2, c.cin, c.h, c.w}, rng);
    const auto w = random_tensor<double>({c.cout, c.cin / c.groups, c.kh, c.kw}, rng);
    const auto b = random_tensor<double>({c.cout}, rng);
    const auto got = ops::conv2d(x, w, b, ops::Conv2dOptions{c.stride, c.pad_h, c.pad_w, c.groups});
    const auto want = conv_oracle(x, w, b, c.stride, c.pad_h, c.pad_w, c.groups);
    ASSERT_EQ(got.shape(), want.shape());
    for (Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv2dTest, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  auto x = random_tensor<double>({1, 2, 5, 5}, rng);
  auto w = random_tensor<double>({3, 2, 3, 3}, rng);
  auto b = random_tensor<double>({3}, rng);
  const auto r = check_gradients(
      [&] { return ops::sum(ops::square(ops::conv2d(x, w, b, 1, 1, 1))); },
      {{"x", x}, {"weight", w}, {"bias", b}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(Conv2dTest, GroupedStridedGradients) {
  Rng rng(3);
  auto x = random_tensor<double>({2, 4, 6, 6}, rng);
  auto w = random_tensor<double>({4, 2, 3, 3}, rng);
  auto b = random_tensor<double>({4}, rng);
  const auto r = check_gradients(
      [&] {
        return ops::sum(ops::square(ops::conv2d(x, w, b, ops::Conv2dOptions{2, 1, 1, 2})));
      },
      {{"x", x}, {"weight", w}, {"bias", b}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(Conv2dTest, ShapeErrorsNameTheAxis) {
  const auto x = Tensor<float>::ones({1, 3, 4, 4});
  const auto w = Tensor<float>::ones({2, 2, 3, 3});
  try {
    ops::conv2d(x, w, Tensor<float>(), 1, 1, 1);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ops::conv2d(x, Tensor<float>::ones({3, 3, 2, 2}), Tensor<float>(), 1, 0, 1),
               DimensionError);
  EXPECT_THROW(ops::conv2d(Tensor<float>::ones({1, 3, 4, 4}), Tensor<float>::ones({2, 1, 3, 3}),
                           Tensor<float>(), 1, 1, 2),
               Error);
}

TEST(ElementwiseTest, ClosedFormValues) {
  const Tensor<float> x(Shape{2}, std::vector<float>{-1.0f, 2.0f});
  const auto r = ops::relu(x);
  EXPECT_EQ(r[0], 0.0f);
  EXPECT_EQ(r[1], 2.0f);
  EXPECT_TRUE(std::isnan(ops::relu(Tensor<float>::full({1}, NAN))[0]));
  const auto z = Tensor<float>::zeros({1});
  EXPECT_EQ(ops::sigmoid(z)[0], 0.5f);
  EXPECT_EQ(ops::tanh(z)[0], 0.0f);
}

TEST(ElementwiseTest, UnaryGradients) {
  Rng rng(4);
  for (auto fn : {ops::UnaryFn::relu, ops::UnaryFn::sigmoid, ops::UnaryFn::tanh,
                  ops::UnaryFn::abs, ops::UnaryFn::square}) {
    auto x = away_from_zero({2, 3, 4}, rng);
    const auto r = check_gradients(
        [&] { return ops::sum(ops::mul(ops::elementwise(x, fn), ops::elementwise(x, fn))); },
        {{"x", x}}, kOpEps);
    EXPECT_LT(r.max_relative_error, kTol) << static_cast<int>(fn);
  }
  auto x = random_tensor<double>({2, 3, 4}, rng, 0.1, 2.0);
  const auto r = check_gradients([&] { return ops::sum(ops::square(ops::log1p(x))); },
                                 {{"x", x}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol);
}

TEST(ElementwiseTest, BinaryBroadcastGradients) {
  Rng rng(5);
  for (auto fn : {ops::BinaryFn::add, ops::BinaryFn::sub, ops::BinaryFn::mul,
                  ops::BinaryFn::div}) {
    auto a = random_tensor<double>({2, 3, 4, 5}, rng, 0.5, 1.5);
    auto b = random_tensor<double>({1, 3, 1, 5}, rng, 0.5, 1.5);
    const auto r = check_gradients(
        [&] { return ops::sum(ops::square(ops::elementwise(a, b, fn))); }, {{"a", a}, {"b", b}},
        kOpEps);
    EXPECT_LT(r.max_relative_error, kTol) << static_cast<int>(fn) << " " << r.worst_tensor;
  }
}

TEST(ElementwiseTest, BroadcastValues) {
  const Tensor<float> a(Shape{2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor<float> b(Shape{1, 2}, std::vector<float>{10, 20});
  const auto c = ops::add(a, b);
  EXPECT_EQ(c[0], 11.0f);
  EXPECT_EQ(c[3], 24.0f);
  EXPECT_THROW(ops::add(a, Tensor<float>::ones({3, 2})), DimensionError);
  EXPECT_THROW(ops::add(a, Tensor<float>::ones({2, 2, 1})), DimensionError);
}

TEST(ElementwiseTest, AffineGradient) {
  Rng rng(6);
  auto x = random_tensor<double>({3, 4}, rng);
  const auto r = check_gradients(
      [&] { return ops::sum(ops::square(ops::affine(x, -2.5, 0.75))); }, {{"x", x}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol);
}

TEST(SoftmaxTest, ClosedForms) {
  const auto u = ops::softmax(Tensor<float>::full({2, 5}, 123.0f), 1);
  for (Index i = 0; i < u.size(); ++i) EXPECT_FLOAT_EQ(u[i], 0.2f);
  const Tensor<double> x(Shape{2}, std::vector<double>{0.0, std::log(3.0)});
  const auto s = ops::softmax(x, 0);
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
}

TEST(SoftmaxTest, RowsSumToOneForExtremeInputs) {
  Rng rng(7);
  const auto x = random_tensor<float>({3, 4, 17}, rng, -80.0, 80.0);
  for (int axis : {0, 1, 2, -1}) {
    const auto s = ops::softmax(x, axis);
    const int a = axis < 0 ? axis + 3 : axis;
    const Index n = x.dim(a);
    const Index inner = a == 2 ? 1 : (a == 1 ? 17 : 68);
    const Index outer = x.size() / (n * inner);
    for (Index o = 0; o < outer; ++o)
      for (Index i = 0; i < inner; ++i) {
        double acc = 0;
        for (Index k = 0; k < n; ++k) acc += s[(o * n + k) * inner + i];
        EXPECT_NEAR(acc, 1.0, 1e-5);
      }
  }
  EXPECT_THROW(ops::softmax(x, 3), DimensionError);
}

TEST(SoftmaxTest, Gradient) {
  Rng rng(8);
  auto x = random_tensor<double>({3, 6}, rng, -2, 2);
  auto weights = random_tensor<double>({3, 6}, rng);
  const auto r = check_gradients(
      [&] { return ops::sum(ops::square(ops::mul(ops::softmax(x, 1), weights))); }, {{"x", x}},
      kOpEps);
  EXPECT_LT(r.max_relative_error, kTol);
}

TEST(MatmulTest, ClosedForms) {
  const Tensor<float> eye(Shape{2, 2}, std::vector<float>{1, 0, 0, 1});
  const Tensor<float> b(Shape{2, 2}, std::vector<float>{3, -1, 2, 5});
  const auto c = ops::matmul(eye, b);
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(c[i], b[i]);
  const auto d = ops::matmul(Tensor<float>(Shape{1, 2}, std::vector<float>{1, 2}),
                             Tensor<float>(Shape{2, 1}, std::vector<float>{3, 4}));
  EXPECT_EQ(d.shape(), (Shape{1, 1}));
  EXPECT_EQ(d[0], 11.0f);
  EXPECT_THROW(ops::matmul(eye, Tensor<float>::ones({3, 2})), DimensionError);
}

TEST(MatmulTest, BatchedBroadcastGradient) {
  Rng rng(9);
  auto a = random_tensor<double>({2, 3, 4, 5}, rng);
  auto b = random_tensor<double>({1, 3, 5, 2}, rng);
  const auto r = check_gradients([&] { return ops::sum(ops::square(ops::matmul(a, b))); },
                                 {{"a", a}, {"b", b}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(GridSampleTest, EndpointsAndMidpoint) {
  const Tensor<float> bank(Shape{3, 2}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const Tensor<float> coords(Shape{4}, std::vector<float>{-1.0f, 1.0f, 0.0f, 3.0f});
  const auto s = ops::grid_sample_1d(bank, coords);
  EXPECT_EQ(s[0], 1.0f);
  EXPECT_EQ(s[1], 2.0f);
  EXPECT_EQ(s[2], 5.0f);
  EXPECT_EQ(s[3], 6.0f);
  EXPECT_EQ(s[4], 3.0f);  // coordinate 0 lands on the middle row of 3
  EXPECT_EQ(s[6], 5.0f);  // clamped
  const Tensor<float> two(Shape{2, 1}, std::vector<float>{2, 6});
  EXPECT_EQ(ops::grid_sample_1d(two, Tensor<float>::zeros({1}))[0], 4.0f);
}

TEST(GridSampleTest, Gradient) {
  Rng rng(10);
  auto bank = random_tensor<double>({5, 4}, rng);
  auto coords = random_tensor<double>({7}, rng, -0.95, 0.95);
  // Keep coordinates off the row boundaries where the derivative jumps.
  for (double& c : coords.mutable_data()) {
    const double pos = (c + 1) * 2;
    if (std::abs(pos - std::round(pos)) < 0.05) c += 0.06;
  }
  const auto r = check_gradients(
      [&] { return ops::sum(ops::square(ops::grid_sample_1d(bank, coords))); },
      {{"bank", bank}, {"coords", coords}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(UpsampleTest, ConstantAndSinglePixel) {
  const auto c = ops::upsample_bilinear2x(Tensor<float>::full({1, 2, 3, 4}, 0.7f));
  EXPECT_EQ(c.shape(), (Shape{1, 2, 6, 8}));
  for (Index i = 0; i < c.size(); ++i) EXPECT_FLOAT_EQ(c[i], 0.7f);
  const auto s = ops::upsample_bilinear2x(Tensor<float>::full({1, 1, 1, 1}, 3.0f));
  EXPECT_EQ(s.shape(), (Shape{1, 1, 2, 2}));
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(s[i], 3.0f);
}

TEST(UpsampleTest, HalfPixelWeights) {
  // Row [0, 4]: output pixel 1 sits at source 0.25 -> 1, pixel 2 at 0.75 -> 3.
  const Tensor<float> x(Shape{1, 1, 1, 2}, std::vector<float>{0, 4});
  const auto y = ops::upsample_bilinear2x(x);
  EXPECT_FLOAT_EQ(y[0], 0.0f);
  EXPECT_FLOAT_EQ(y[1], 1.0f);
  EXPECT_FLOAT_EQ(y[2], 3.0f);
  EXPECT_FLOAT_EQ(y[3], 4.0f);
}

TEST(UpsampleTest, Gradient) {
  Rng rng(11);
  auto x = random_tensor<double>({1, 2, 3, 4}, rng);
  auto w = random_tensor<double>({1, 2, 6, 8}, rng);
  const auto r = check_gradients(
      [&] { return ops::sum(ops::square(ops::mul(ops::upsample_bilinear2x(x), w))); },
      {{"x", x}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol);
}

TEST(PoolingTest, AveragePoolValuesAndGradient) {
  const Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 6});
  EXPECT_EQ(ops::avg_pool2x(x)[0], 3.0f);
  Rng rng(12);
  auto y = random_tensor<double>({2, 3, 4, 6}, rng);
  const auto r = check_gradients([&] { return ops::sum(ops::square(ops::avg_pool2x(y))); },
                                 {{"x", y}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol);
  auto z = random_tensor<double>({1, 2, 7, 9}, rng);
  const auto r2 = check_gradients(
      [&] { return ops::sum(ops::square(ops::adaptive_avg_pool2d(z, 3, 4))); }, {{"x", z}},
      kOpEps);
  EXPECT_LT(r2.max_relative_error, kTol);
  EXPECT_THROW(ops::adaptive_avg_pool2d(z, 8, 4), ConfigError);
}

TEST(ShapeOpsTest, GradientsThroughReshapePermuteConcatNarrow) {
  Rng rng(13);
  auto a = random_tensor<double>({2, 3, 4}, rng);
  auto b = random_tensor<double>({2, 1, 4}, rng);
  auto w = random_tensor<double>({4, 2, 3}, rng);
  const auto r = check_gradients(
      [&] {
        const auto c = ops::concat<double>({a, b}, 1);                 // [2,4,4]
        const auto n = ops::narrow(c, 1, 1, 3);                        // [2,3,4]
        const auto p = ops::permute(n, {2, 0, 1});                     // [4,2,3]
        const auto q = ops::reshape(ops::mul(p, w), Shape{8, 3});
        return ops::mean(ops::square(q));
      },
      {{"a", a}, {"b", b}, {"w", w}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(ShapeOpsTest, WindowMemberAndReplicatePad) {
  const Tensor<float> x(Shape{1, 1, 3, 3}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto p = ops::pad_replicate_even(x);
  EXPECT_EQ(p.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_EQ(p[3], 3.0f);
  EXPECT_EQ(p[15], 9.0f);
  EXPECT_EQ(p[12], 7.0f);
  const auto m = ops::window_member(p, 1, 0);
  EXPECT_EQ(m.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(m[0], 4.0f);
  EXPECT_EQ(m[2], 7.0f);
  Rng rng(14);
  auto y = random_tensor<double>({1, 2, 5, 3}, rng);
  const auto r = check_gradients(
      [&] {
        const auto padded = ops::pad_replicate_even(y);
        return ops::sum(ops::square(ops::sub(ops::window_member(padded, 0, 1),
                                             ops::scale(ops::window_member(padded, 1, 1), 2.0))));
      },
      {{"y", y}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol);
}

TEST(PixelKernelTest, IdentityAndBoxKernels) {
  Rng rng(15);
  const auto image = random_tensor<double>({1, 3, 5, 6}, rng);
  Tensor<double> identity(Shape{1, 9, 5, 6});
  for (Index p = 0; p < 30; ++p) identity[4 * 30 + p] = 1.0;
  const auto same = ops::apply_pixel_kernels(image, identity);
  for (Index i = 0; i < image.size(); ++i) EXPECT_EQ(same[i], image[i]);
  const auto box = ops::apply_pixel_kernels(image, Tensor<double>::full({1, 9, 5, 6}, 1.0 / 9));
  const auto oracle = conv_oracle(ops::reshape(image, Shape{3, 1, 5, 6}),
                                  Tensor<double>::full({1, 1, 3, 3}, 1.0 / 9), Tensor<double>(),
                                  1, 1, 1, 1);
  for (Index i = 0; i < image.size(); ++i) EXPECT_NEAR(box[i], oracle[i], 1e-14);
}

TEST(PixelKernelTest, Gradient) {
  Rng rng(16);
  auto image = random_tensor<double>({1, 2, 4, 5}, rng);
  auto kernels = random_tensor<double>({1, 9, 4, 5}, rng);
  const auto r = check_gradients(
      [&] { return ops::sum(ops::square(ops::apply_pixel_kernels(image, kernels))); },
      {{"image", image}, {"kernels", kernels}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(CompositeTest, FiveOpChainMatchesFiniteDifferences) {
  Rng rng(17);
  auto x = random_tensor<double>({1, 2, 6, 6}, rng);
  auto w1 = random_tensor<double>({4, 2, 3, 3}, rng);
  auto w2 = random_tensor<double>({2, 4, 1, 1}, rng);
  const auto r = check_gradients(
      [&] {
        auto h = ops::tanh(ops::conv2d(x, w1, Tensor<double>(), 1, 1, 1));
        h = ops::avg_pool2x(h);
        h = ops::upsample_bilinear2x(ops::conv2d(h, w2, Tensor<double>(), 1, 0, 1));
        const auto s = ops::softmax(ops::reshape(h, Shape{2, 36}), 1);
        return ops::mean(ops::square(ops::sub(s, ops::sigmoid(ops::reshape(x, Shape{2, 36})))));
      },
      {{"x", x}, {"w1", w1}, {"w2", w2}}, kOpEps);
  EXPECT_LT(r.max_relative_error, kTol) << r.worst_tensor;
}

TEST(DeterminismTest, RepeatedForwardIsBitIdentical) {
  Rng rng(18);
  const auto x = random_tensor<float>({1, 8, 16, 16}, rng);
  const auto w = random_tensor<float>({8, 8, 3, 3}, rng);
  const auto a = ops::conv2d(x, w, Tensor<float>(), 1, 1, 1);
  const auto b = ops::conv2d(x, w, Tensor<float>(), 1, 1, 1);
  for (Index i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

}  // namespace
}  // namespace mcdk
