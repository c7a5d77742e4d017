// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mcdk/nn/layers.hpp"

namespace mcdk::kernel {

using nn::Conv2d;
using nn::Linear;
using nn::ParamList;

/// Shared pool of q learnable l x l denoising kernels.
template <typename S>
struct KernelPool {
  Tensor<S> pi;  // [q,l,l]

  /// Independent Bernoulli(0.5) entries in {0,1}.
  static KernelPool bernoulli(Index count, Index size, Rng& rng);

  Index count() const { return pi.dim(0); }
  Index size() const { return pi.dim(1); }

  void collect(ParamList<S>& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/pi", pi);
  }
};

/// Input-conditioned pool: pi_bar = (1 - alpha) * pi + alpha * r.
template <typename S>
struct AdjustedPool {
  Tensor<S> residual;    // [q,l,l]
  Tensor<S> alpha;       // [q,1,1], in (0,1)
  Tensor<S> pi_bar;      // [q,l,l]
  Tensor<S> descriptor;  // [1,Dk]
};

/// Kernel-adjustment branch driven by the coarsest sampling-network features.
template <typename S>
struct KernelAdjuster {
  Conv2d<S> excite;               // per-position C -> q
  Conv2d<S> neighbor;             // window of 5 along the kernel index
  Linear<S> alpha_hidden;         // l*l -> hidden
  Linear<S> alpha_out;            // hidden -> 1
  Conv2d<S> descriptor_collapse;  // l x l -> 1 per kernel
  Linear<S> descriptor_linear;    // q -> Dk

  KernelAdjuster() = default;
  KernelAdjuster(Index feature_channels, Index count, Index size, Index descriptor_dim, Rng& rng,
                 Index alpha_hidden_width = 16);

  /// features: [1,C,h,w] with h, w >= l.
  AdjustedPool<S> operator()(const Tensor<S>& features, const KernelPool<S>& pool) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
};

/// Predicts the kernel map h [1,2,H,W] in [-1,1]: channel 0 is the pool
/// coordinate, channel 1 the identity-blend weight before remapping.
template <typename S>
struct KernelMapHead {
  Conv2d<S> conv1;
  Conv2d<S> conv2;
  Conv2d<S> conv3;
  Conv2d<S> out;

  KernelMapHead() = default;
  KernelMapHead(Index in_channels, Index width, Rng& rng);

  /// Concatenates fine features, the adaptive image, the GBuffers and the
  /// spatially expanded descriptor [1,Dk].
  Tensor<S> operator()(const Tensor<S>& fine_features, const Tensor<S>& image,
                       const Tensor<S>& gbuffers, const Tensor<S>& descriptor) const;

  void collect(ParamList<S>& out, const std::string& prefix) const;
  Index parameter_count() const;
};

template <typename S>
struct PixelKernels {
  Tensor<S> sampled;  // [1,l*l,H,W], grid-sampled from softmax(pi_bar)
  Tensor<S> blended;  // [1,l*l,H,W], mixed with the identity kernel
};

/// Per-pixel kernels from the adjusted pool and the kernel map.
template <typename S>
PixelKernels<S> interpolate_kernels(const Tensor<S>& pi_bar, const Tensor<S>& kernel_map);

/// First-stage denoise: per-pixel kernels applied to image [1,C,H,W].
template <typename S>
Tensor<S> interpolate_and_apply(const Tensor<S>& image, const Tensor<S>& pi_bar,
                                const Tensor<S>& kernel_map);

}  // namespace mcdk::kernel
