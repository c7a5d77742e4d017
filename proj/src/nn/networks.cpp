// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/nn/networks.hpp"

#include <cmath>

namespace mcdk::nn {
namespace {

// Scales a freshly initialized output layer so untrained networks start
// close to their identity path.
template <typename S>
void shrink(Conv2d<S>& conv, S factor) {
  for (S& v : conv.weight.mutable_data()) v *= factor;
}

// Upsamples x to match the spatial size of `like` (which may be odd).
template <typename S>
Tensor<S> upsample_to(const Tensor<S>& x, const Tensor<S>& like) {
  Tensor<S> up = ops::upsample_bilinear2x(x);
  if (up.dim(2) != like.dim(2)) up = ops::narrow(up, 2, 0, like.dim(2));
  if (up.dim(3) != like.dim(3)) up = ops::narrow(up, 3, 0, like.dim(3));
  return up;
}

}  // namespace

void NetworkConfig::validate() const {
  if (sampling_widths.empty() || denoising_widths.empty()) {
    throw ConfigError("network widths must not be empty");
  }
  for (Index w : sampling_widths) {
    if (w <= 0 || w % ghost_groups != 0 || w % 2 != 0) {
      throw ConfigError("sampling widths must be positive, even and divisible by " +
                        std::to_string(ghost_groups));
    }
  }
  for (Index w : denoising_widths) {
    if (w <= 0) throw ConfigError("denoising widths must be positive");
  }
  if (denoising_widths.back() % attention_heads != 0 || denoising_widths.back() % 4 != 0) {
    throw ConfigError("deepest denoising width must be divisible by 4 and by the head count");
  }
  if (kernel_count < 2 || kernel_size % 2 == 0 || kernel_size < 1) {
    throw ConfigError("kernel pool needs q >= 2 and odd l");
  }
}

template <typename S>
SamplingNet<S>::SamplingNet(const NetworkConfig& config, Rng& rng) {
  config.validate();
  const auto& w = config.sampling_widths;
  const std::size_t levels = w.size();
  stem = Conv2d<S>(kSamplingInputChannels, w[0], 3, rng);
  for (std::size_t i = 0; i < levels; ++i) {
    encoder.emplace_back(i == 0 ? w[0] : w[i - 1], w[i], rng, config.ghost_kernel,
                         config.ghost_groups);
    if (i + 1 < levels) pools.emplace_back(w[i], rng, config.pool_hidden);
  }
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    decoder.emplace_back(w[i] + w[i + 1], w[i], rng, config.ghost_kernel, config.ghost_groups);
  }
  m_head = Conv2d<S>(w[0], 1, 1, rng);
  pool = kernel::KernelPool<S>::bernoulli(config.kernel_count, config.kernel_size, rng);
  adjuster = kernel::KernelAdjuster<S>(w.back(), config.kernel_count, config.kernel_size,
                                       config.descriptor_dim, rng);
  map_head = kernel::KernelMapHead<S>(w[0] + 3 + 5 + config.descriptor_dim,
                                      config.kernel_head_width, rng);
  shrink(map_head.out, S(0.1));
}

template <typename S>
typename SamplingNet<S>::Features SamplingNet<S>::operator()(const Tensor<S>& input) const {
  if (input.rank() != 4 || input.dim(1) != kSamplingInputChannels) {
    throw DimensionError("sampling network expects [B,6,H,W] on the channel axis, got " +
                         shape_string(input.shape()));
  }
  std::vector<Tensor<S>> skips;
  Tensor<S> x = ops::relu(stem(input));
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    if (i > 0) x = pools[i - 1](x);
    x = ops::relu(encoder[i](x));
    skips.push_back(x);
  }
  Features f;
  f.coarse = x;
  for (std::size_t i = decoder.size(); i-- > 0;) {
    x = ops::relu(decoder[i](ops::concat<S>({upsample_to(x, skips[i]), skips[i]}, 1)));
  }
  f.fine = x;
  f.m_bar = m_head(x);
  return f;
}

template <typename S>
void SamplingNet<S>::collect(ParamList<S>& out, const std::string& prefix) const {
  stem.collect(out, prefix + "/stem");
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    encoder[i].collect(out, prefix + "/encoder" + std::to_string(i));
  }
  for (std::size_t i = 0; i < pools.size(); ++i) {
    pools[i].collect(out, prefix + "/pool" + std::to_string(i));
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    decoder[i].collect(out, prefix + "/decoder" + std::to_string(i));
  }
  m_head.collect(out, prefix + "/m_head");
  pool.collect(out, prefix + "/kernel_pool");
  adjuster.collect(out, prefix + "/adjuster");
  map_head.collect(out, prefix + "/map_head");
}

template <typename S>
Index SamplingNet<S>::parameter_count() const {
  ParamList<S> params;
  collect(params, "");
  return nn::parameter_count(params);
}

template <typename S>
DenoisingNet<S>::DenoisingNet(const std::vector<Index>& widths, Index pool_hidden, Index heads,
                              Rng& rng) {
  const std::size_t levels = widths.size();
  for (std::size_t i = 0; i < levels; ++i) {
    encoder.emplace_back(i == 0 ? kDenoisingInputChannels : widths[i - 1], widths[i], 3, rng);
    if (i + 1 < levels) pools.emplace_back(widths[i], rng, pool_hidden);
  }
  align = SemanticAlign<S>(widths.back(), rng, heads);
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    decoder.emplace_back(widths[i] + widths[i + 1], widths[i], 3, rng);
  }
  head = Conv2d<S>(widths[0], 3, 1, rng);
}

template <typename S>
typename DenoisingNet<S>::Output DenoisingNet<S>::operator()(const Tensor<S>& image,
                                                             const Tensor<S>& network_input,
                                                             const Tensor<S>& previous) const {
  if (network_input.rank() != 4 || network_input.dim(1) != kDenoisingInputChannels) {
    throw DimensionError("denoising network expects [B,10,H,W] on the channel axis, got " +
                         shape_string(network_input.shape()));
  }
  std::vector<Tensor<S>> skips;
  Tensor<S> x = network_input;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    if (i > 0) x = pools[i - 1](x);
    x = ops::relu(encoder[i](x));
    skips.push_back(x);
  }
  auto aligned = align(x, previous);
  x = aligned.out;
  for (std::size_t i = decoder.size(); i-- > 0;) {
    x = ops::relu(decoder[i](ops::concat<S>({upsample_to(x, skips[i]), skips[i]}, 1)));
  }
  return Output{ops::relu(ops::add(image, head(x))), aligned.state};
}

template <typename S>
void DenoisingNet<S>::collect(ParamList<S>& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    encoder[i].collect(out, prefix + "/encoder" + std::to_string(i));
  }
  for (std::size_t i = 0; i < pools.size(); ++i) {
    pools[i].collect(out, prefix + "/pool" + std::to_string(i));
  }
  align.collect(out, prefix + "/align");
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    decoder[i].collect(out, prefix + "/decoder" + std::to_string(i));
  }
  head.collect(out, prefix + "/head");
}

template <typename S>
Index DenoisingNet<S>::parameter_count() const {
  ParamList<S> params;
  collect(params, "");
  return nn::parameter_count(params);
}

std::vector<Index> matched_denoising_widths(const std::vector<Index>& widths, Index target,
                                            Index pool_hidden, Index heads) {
  const auto scaled = [&](double factor) {
    std::vector<Index> out;
    for (Index w : widths) {
      out.push_back(std::max<Index>(4, 4 * static_cast<Index>(std::lround(factor * w / 4.0))));
    }
    return out;
  };
  const auto count = [&](const std::vector<Index>& w) {
    Rng rng(0);
    return DenoisingNet<float>(w, pool_hidden, heads, rng).parameter_count();
  };
  std::vector<Index> best = widths;
  Index best_gap = std::abs(count(widths) - target);
  for (double factor = 0.5; factor <= 3.0; factor += 0.01) {
    const auto w = scaled(factor);
    if (w.back() % heads != 0) continue;
    const Index gap = std::abs(count(w) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
  }
  return best;
}

template struct SamplingNet<float>;
template struct SamplingNet<double>;
template struct DenoisingNet<float>;
template struct DenoisingNet<double>;

}  // namespace mcdk::nn
