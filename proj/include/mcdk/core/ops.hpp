// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mcdk/core/tensor.hpp"

/// Differentiable tensor primitives. Every function records a backward node
/// on the active Graph when any input requires grad; otherwise it is a plain
/// forward computation.
namespace mcdk::ops {

struct Conv2dOptions {
  Index stride = 1;
  Index pad_h = 0;
  Index pad_w = 0;
  Index groups = 1;
};

/// Cross-correlation of x[B,Cin,H,W] with weight[Cout,Cin/groups,kh,kw] and
/// zero padding. `bias` may be an undefined tensor.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias,
                 const Conv2dOptions& options);

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias,
                 Index stride, Index padding, Index groups) {
  return conv2d(x, weight, bias, Conv2dOptions{stride, padding, padding, groups});
}

enum class UnaryFn { relu, sigmoid, tanh, abs, square, log1p };
enum class BinaryFn { add, sub, mul, div };

template <typename S>
Tensor<S> elementwise(const Tensor<S>& x, UnaryFn fn);

/// Binary op with singleton-axis expansion: both operands have the same rank
/// and each axis either matches or is 1 on one side.
template <typename S>
Tensor<S> elementwise(const Tensor<S>& a, const Tensor<S>& b, BinaryFn fn);

template <typename S> Tensor<S> relu(const Tensor<S>& x) { return elementwise(x, UnaryFn::relu); }
template <typename S> Tensor<S> sigmoid(const Tensor<S>& x) { return elementwise(x, UnaryFn::sigmoid); }
template <typename S> Tensor<S> tanh(const Tensor<S>& x) { return elementwise(x, UnaryFn::tanh); }
template <typename S> Tensor<S> abs(const Tensor<S>& x) { return elementwise(x, UnaryFn::abs); }
template <typename S> Tensor<S> square(const Tensor<S>& x) { return elementwise(x, UnaryFn::square); }
template <typename S> Tensor<S> log1p(const Tensor<S>& x) { return elementwise(x, UnaryFn::log1p); }

template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) { return elementwise(a, b, BinaryFn::add); }
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) { return elementwise(a, b, BinaryFn::sub); }
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) { return elementwise(a, b, BinaryFn::mul); }
template <typename S> Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) { return elementwise(a, b, BinaryFn::div); }

/// x * factor + offset.
template <typename S>
Tensor<S> affine(const Tensor<S>& x, S factor, S offset);

template <typename S> Tensor<S> scale(const Tensor<S>& x, S factor) { return affine(x, factor, S(0)); }
template <typename S> Tensor<S> add_scalar(const Tensor<S>& x, S offset) { return affine(x, S(1), offset); }
template <typename S> Tensor<S> one_minus(const Tensor<S>& x) { return affine(x, S(-1), S(1)); }

/// Numerically stable softmax along `axis`.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis);

/// Batched a[...,M,K] x b[...,K,N]; leading axes expand from 1.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);

/// Linear interpolation along the rows of bank[q,D] at coordinates in
/// [-1,1] (clamped): -1 selects row 0 and +1 selects row q-1. Output [N,D].
template <typename S>
Tensor<S> grid_sample_1d(const Tensor<S>& bank, const Tensor<S>& coords);

/// Bilinear 2x upsampling of [B,C,H,W] with half-pixel centers.
template <typename S>
Tensor<S> upsample_bilinear2x(const Tensor<S>& x);

/// 2x2 average pooling, stride 2. H and W must be even.
template <typename S>
Tensor<S> avg_pool2x(const Tensor<S>& x);

/// Average pooling into an out_h x out_w grid of (possibly overlapping) bins.
template <typename S>
Tensor<S> adaptive_avg_pool2d(const Tensor<S>& x, Index out_h, Index out_w);

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape);

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<int>& order);

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis);

template <typename S>
Tensor<S> narrow(const Tensor<S>& x, int axis, Index start, Index length);

/// Member (dy, dx) of every 2x2 window: x[:, :, dy::2, dx::2].
template <typename S>
Tensor<S> window_member(const Tensor<S>& x, Index dy, Index dx);

/// Pads odd H or W by replicating the last row/column.
template <typename S>
Tensor<S> pad_replicate_even(const Tensor<S>& x);

/// Applies a per-pixel k x k kernel kernels[B,k*k,H,W] to every channel of
/// image[B,C,H,W] with zero padding.
template <typename S>
Tensor<S> apply_pixel_kernels(const Tensor<S>& image, const Tensor<S>& kernels);

template <typename S>
Tensor<S> sum(const Tensor<S>& x);

template <typename S>
Tensor<S> mean(const Tensor<S>& x);

}  // namespace mcdk::ops
