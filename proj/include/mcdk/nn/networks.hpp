// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mcdk/kernel/kernel_pool.hpp"
#include "mcdk/nn/operators.hpp"

namespace mcdk::nn {

struct NetworkConfig {
  std::vector<Index> sampling_widths{16, 32, 64};
  std::vector<Index> denoising_widths{32, 64, 96, 128};
  Index kernel_count = 128;  // q
  Index kernel_size = 5;     // l
  Index descriptor_dim = 8;
  Index kernel_head_width = 16;
  Index ghost_kernel = 7;
  Index ghost_groups = 4;
  Index pool_hidden = 8;
  Index attention_heads = 4;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

inline constexpr Index kSamplingInputChannels = 6;   // gray c_1 + depth + normal + gray albedo
inline constexpr Index kDenoisingInputChannels = 10;  // image + depth + normal + RGB albedo

/// Encoder-decoder predicting sampling logits, the per-pixel kernel map and
/// the adjusted kernel pool.
template <typename S>
struct SamplingNet {
  Conv2d<S> stem;
  std::vector<FastGhostConv<S>> encoder;
  std::vector<PositionAwarePool<S>> pools;
  std::vector<FastGhostConv<S>> decoder;  // decoder[i] produces level i
  Conv2d<S> m_head;
  kernel::KernelPool<S> pool;
  kernel::KernelAdjuster<S> adjuster;
  kernel::KernelMapHead<S> map_head;

  struct Features {
    Tensor<S> m_bar;   // [1,1,H,W]
    Tensor<S> fine;    // [1,widths[0],H,W]
    Tensor<S> coarse;  // deepest encoder output
  };

  SamplingNet() = default;
  SamplingNet(const NetworkConfig& config, Rng& rng);

  /// input: [1,6,H,W].
  Features operator()(const Tensor<S>& input) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
};

/// Recurrent encoder-decoder with semantic alignment at the deepest level.
/// Output is max(0, image + residual).
template <typename S>
struct DenoisingNet {
  std::vector<Conv2d<S>> encoder;
  std::vector<PositionAwarePool<S>> pools;
  SemanticAlign<S> align;
  std::vector<Conv2d<S>> decoder;  // decoder[i] produces level i
  Conv2d<S> head;

  struct Output {
    Tensor<S> image;
    Tensor<S> state;
  };

  DenoisingNet() = default;
  DenoisingNet(const std::vector<Index>& widths, Index pool_hidden, Index heads, Rng& rng);

  /// image: [1,3,H,W] linear radiance, network_input: [1,10,H,W];
  /// previous: deepest features of the previous frame or undefined.
  Output operator()(const Tensor<S>& image, const Tensor<S>& network_input,
                    const Tensor<S>& previous) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
};

/// Denoiser widths scaled so the parameter count comes as close as possible
/// to `target`; widths stay multiples of 4.
std::vector<Index> matched_denoising_widths(const std::vector<Index>& widths, Index target,
                                            Index pool_hidden, Index heads);

}  // namespace mcdk::nn
