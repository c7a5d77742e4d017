// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/nn/losses.hpp"

namespace mcdk::nn {
namespace {

template <typename S>
Conv2d<S> frozen(Index cin, Index cout, Rng& rng) {
  Conv2d<S> conv(cin, cout, 3, rng);
  conv.weight.set_requires_grad(false);
  conv.bias.set_requires_grad(false);
  return conv;
}

}  // namespace

template <typename S>
RandomConvFeatures<S>::RandomConvFeatures(std::uint64_t seed, Index width) {
  Rng rng(seed);
  conv1_ = frozen<S>(3, width / 2, rng);
  conv2_ = frozen<S>(width / 2, width, rng);
  conv3_ = frozen<S>(width, width, rng);
}

template <typename S>
Tensor<S> RandomConvFeatures<S>::operator()(const Tensor<S>& image) const {
  return ops::relu(conv3_(ops::relu(conv2_(ops::relu(conv1_(image))))));
}

template <typename S>
LossTerms<S> composite_loss(const std::vector<Tensor<S>>& predicted,
                            const std::vector<Tensor<S>>& reference, const LossWeights& weights,
                            const FeatureExtractor<S>& features) {
  if (predicted.size() != reference.size()) {
    throw DimensionError("composite_loss: " + std::to_string(predicted.size()) +
                         " predicted frames vs " + std::to_string(reference.size()) +
                         " reference frames");
  }
  if (predicted.empty()) throw ConfigError("composite_loss: empty sequence");
  if (weights.temporal != 0.0 && predicted.size() < 2) {
    throw ConfigError("composite_loss: the temporal term needs at least two frames");
  }
  if (weights.spatial < 0 || weights.temporal < 0 || weights.perceptual < 0) {
    throw ConfigError("composite_loss: weights must be non-negative");
  }
  const std::size_t last = predicted.size() - 1;
  const Tensor<S>& d = predicted[last];
  const Tensor<S>& r = reference[last];

  LossTerms<S> terms;
  terms.spatial = ops::mean(ops::abs(ops::sub(d, r)));
  if (predicted.size() >= 2) {
    const Tensor<S> dd = ops::sub(d, predicted[last - 1]);
    const Tensor<S> dr = ops::sub(r, reference[last - 1]);
    terms.temporal = ops::mean(ops::abs(ops::sub(dd, dr)));
  } else {
    terms.temporal = Tensor<S>::scalar(S(0));
  }
  terms.perceptual = ops::mean(ops::square(ops::sub(features(d), features(r))));
  terms.total = ops::add(
      ops::add(ops::scale(terms.spatial, static_cast<S>(weights.spatial)),
               ops::scale(terms.temporal, static_cast<S>(weights.temporal))),
      ops::scale(terms.perceptual, static_cast<S>(weights.perceptual)));
  return terms;
}

template class RandomConvFeatures<float>;
template class RandomConvFeatures<double>;
template LossTerms<float> composite_loss(const std::vector<Tensor<float>>&,
                                         const std::vector<Tensor<float>>&, const LossWeights&,
                                         const FeatureExtractor<float>&);
template LossTerms<double> composite_loss(const std::vector<Tensor<double>>&,
                                          const std::vector<Tensor<double>>&, const LossWeights&,
                                          const FeatureExtractor<double>&);

}  // namespace mcdk::nn
