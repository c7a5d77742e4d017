// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mcdk/core/ops.hpp"
#include "mcdk/core/random.hpp"

namespace mcdk::nn {

/// Named trainable tensors, in a stable order.
template <typename S>
using ParamList = std::vector<std::pair<std::string, Tensor<S>>>;

template <typename S>
Index parameter_count(const ParamList<S>& params) {
  Index n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

/// Tensor of independent N(0, stddev^2) draws, trainable.
template <typename S>
Tensor<S> normal_parameter(Shape shape, double stddev, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (S& v : t.mutable_data()) v = static_cast<S>(rng.normal(stddev));
  t.set_requires_grad(true);
  return t;
}

template <typename S>
Tensor<S> zero_parameter(Shape shape) {
  Tensor<S> t(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

/// 2D convolution with He-normal weights and zero bias.
template <typename S>
struct Conv2d {
  Tensor<S> weight;
  Tensor<S> bias;
  ops::Conv2dOptions options;

  Conv2d() = default;
  Conv2d(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w, Rng& rng,
         Index groups = 1, Index stride = 1)
      : weight(normal_parameter<S>(
            {out_channels, in_channels / groups, kernel_h, kernel_w},
            std::sqrt(2.0 / static_cast<double>(in_channels / groups * kernel_h * kernel_w)),
            rng)),
        bias(zero_parameter<S>({out_channels})),
        options{stride, kernel_h / 2, kernel_w / 2, groups} {
    if (in_channels % groups != 0 || out_channels % groups != 0) {
      throw ConfigError("conv channels " + std::to_string(in_channels) + "->" +
                        std::to_string(out_channels) + " not divisible by groups " +
                        std::to_string(groups));
    }
  }
  Conv2d(Index in_channels, Index out_channels, Index kernel, Rng& rng, Index groups = 1,
         Index stride = 1)
      : Conv2d(in_channels, out_channels, kernel, kernel, rng, groups, stride) {}

  Tensor<S> operator()(const Tensor<S>& x) const {
    return ops::conv2d(x, weight, bias, options);
  }

  void collect(ParamList<S>& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/weight", weight);
    if (bias.defined()) out.emplace_back(prefix + "/bias", bias);
  }

  /// Drops the bias, for outputs that feed a shift-invariant softmax.
  Conv2d&& without_bias() && {
    bias = Tensor<S>();
    return std::move(*this);
  }

  /// Scales the initial weights, for layers that close a residual branch.
  Conv2d&& scaled(S factor) && {
    for (S& v : weight.mutable_data()) v *= factor;
    return std::move(*this);
  }

  Index in_channels() const { return weight.dim(1) * options.groups; }
  Index out_channels() const { return weight.dim(0); }
  Index parameter_count() const { return weight.size() + (bias.defined() ? bias.size() : 0); }

  /// Zeroes weights and bias in place.
  void zero() {
    for (S& v : weight.mutable_data()) v = S(0);
    if (bias.defined()) {
      for (S& v : bias.mutable_data()) v = S(0);
    }
  }
};

/// Dense layer on row vectors: x[N,in] -> x W + b, W[in,out], b[1,out].
template <typename S>
struct Linear {
  Tensor<S> weight;
  Tensor<S> bias;

  Linear() = default;
  Linear(Index in_features, Index out_features, Rng& rng)
      : weight(normal_parameter<S>({in_features, out_features},
                                   std::sqrt(1.0 / static_cast<double>(in_features)), rng)),
        bias(zero_parameter<S>({1, out_features})) {}

  Tensor<S> operator()(const Tensor<S>& x) const {
    return ops::add(ops::matmul(x, weight), bias);
  }

  void collect(ParamList<S>& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/weight", weight);
    out.emplace_back(prefix + "/bias", bias);
  }

  Index parameter_count() const { return weight.size() + bias.size(); }
};

}  // namespace mcdk::nn
