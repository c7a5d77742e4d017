// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mcdk/nn/layers.hpp"

namespace mcdk::nn {

/// Large-kernel group convolution, ReLU, pointwise channel mixing, then a
/// depthwise 3x3 "ghost" of the pointwise output concatenated 1:1.
template <typename S>
struct FastGhostConv {
  Conv2d<S> group;
  Conv2d<S> point;
  Conv2d<S> ghost;

  FastGhostConv() = default;
  FastGhostConv(Index in_channels, Index out_channels, Rng& rng, Index kernel = 7,
                Index groups = 4);

  Tensor<S> operator()(const Tensor<S>& x) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
  /// Parameters of a dense kernel x kernel convolution with the same shape.
  static Index dense_parameter_count(Index in_channels, Index out_channels, Index kernel);
  void zero();
};

/// Learned convex 2x2 pooling. Each window member is scored from its
/// features, its absolute position and its one-hot slot in the window; the
/// softmax of the four scores weights the members.
template <typename S>
struct PositionAwarePool {
  Conv2d<S> score_hidden;
  Conv2d<S> score_out;

  PositionAwarePool() = default;
  PositionAwarePool(Index channels, Rng& rng, Index hidden = 8);

  Tensor<S> operator()(const Tensor<S>& x) const;
  /// Softmaxed member weights [B,4,ceil(H/2),ceil(W/2)].
  Tensor<S> window_scores(const Tensor<S>& x) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
};

/// 2D sine-cosine positional encoding [1,C,h,w]: the first C/2 channels
/// encode the row, the rest the column. C must be a multiple of 4.
template <typename S>
Tensor<S> sine_cosine_encoding(Index channels, Index height, Index width);

/// Multi-head attention from current-frame queries to previous-frame keys
/// and values, followed by a two-layer 3x3 feed-forward block; both stages
/// are residual.
template <typename S>
struct SemanticAlign {
  Conv2d<S> query;
  Conv2d<S> key;
  Conv2d<S> value;
  Conv2d<S> output;
  Conv2d<S> ff1;
  Conv2d<S> ff2;
  Index heads = 4;

  struct Result {
    Tensor<S> out;
    Tensor<S> state;      // features kept for the next frame
    Tensor<S> attention;  // [B,heads,T,T]
  };

  SemanticAlign() = default;
  SemanticAlign(Index channels, Rng& rng, Index heads = 4);

  /// An undefined `previous` means first frame: the current features stand in.
  Result operator()(const Tensor<S>& current, const Tensor<S>& previous) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
};

}  // namespace mcdk::nn
