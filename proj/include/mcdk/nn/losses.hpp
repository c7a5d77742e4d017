// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mcdk/nn/layers.hpp"

namespace mcdk::nn {

struct LossWeights {
  double spatial = 0.8;
  double temporal = 0.2;
  double perceptual = 0.1;
};

/// Maps an image [B,3,H,W] to a feature tensor for the perceptual term.
template <typename S>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Tensor<S> operator()(const Tensor<S>& image) const = 0;
};

/// Three 3x3 conv + ReLU layers with fixed random weights.
template <typename S>
class RandomConvFeatures final : public FeatureExtractor<S> {
 public:
  explicit RandomConvFeatures(std::uint64_t seed = 7, Index width = 16);
  Tensor<S> operator()(const Tensor<S>& image) const override;

 private:
  Conv2d<S> conv1_, conv2_, conv3_;
};

template <typename S>
struct LossTerms {
  Tensor<S> total;
  Tensor<S> spatial;     // mean |d_last - ref_last|
  Tensor<S> temporal;    // mean |(d_last - d_prev) - (ref_last - ref_prev)|
  Tensor<S> perceptual;  // mean squared feature distance on the last frame
};

/// Weighted sum of the spatial, temporal and perceptual terms over a frame
/// sequence. The temporal term needs at least two frames unless its weight
/// is zero.
template <typename S>
LossTerms<S> composite_loss(const std::vector<Tensor<S>>& predicted,
                            const std::vector<Tensor<S>>& reference, const LossWeights& weights,
                            const FeatureExtractor<S>& features);

}  // namespace mcdk::nn
