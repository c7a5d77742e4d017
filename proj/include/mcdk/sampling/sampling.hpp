// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "mcdk/core/tensor.hpp"

namespace mcdk::sampling {

/// Uniform renders at 2^0 .. 2^5 spp.
inline constexpr int kStackLevels = 6;
/// Largest per-pixel count representable by the stack's binary encoding.
inline constexpr int kMaxSpp = (1 << kStackLevels) - 1;

template <typename S>
using SppStack = std::array<Tensor<S>, kStackLevels>;

/// Budget spent on the adaptive render once the 1-spp guide image is paid for.
inline double effective_budget(double budget) { return budget - 1.0; }

template <typename S>
struct SamplingMap {
  Tensor<S> m_bar;     // [1,1,H,W] network logits
  Tensor<S> probs;     // [1,1,H,W] softmax over all pixels
  std::vector<int> m;  // per-pixel spp, row-major
  Index height = 0;
  Index width = 0;
  double budget = 0;   // average spp the map distributes

  Index pixels() const { return height * width; }
  long long total() const;
  /// The integer map as a [1,1,H,W] tensor.
  Tensor<S> counts() const;
};

/// Distributes pixels * budget samples proportionally to softmax(m_bar).
/// Mass above the per-pixel cap of 63 is handed to the remaining pixels, and
/// rounding gives leftover samples to the largest fractional parts, so the
/// total equals round(pixels * budget).
template <typename S>
SamplingMap<S> normalize_budget(const Tensor<S>& m_bar, double budget);

/// Combines the uniform renders selected by the binary digits of m into an
/// m-spp image; pixels with m = 0 take the 1-spp value. Levels share one
/// shape whose trailing axes are [.., 3, H, W].
template <typename S>
Tensor<S> assemble_adaptive(const SppStack<S>& stack, std::span<const int> m);

/// Per-pixel surrogate derivative mean_c (reference - image) / m, zero where
/// m = 0. Returned as [1,1,H,W].
template <typename S>
Tensor<S> sampling_gradient(const Tensor<S>& image, const Tensor<S>& reference,
                            std::span<const int> m);

/// (c1 + m * image) / (1 + m) per pixel; differentiable in image and c1.
template <typename S>
Tensor<S> blend_c1(const Tensor<S>& image, const Tensor<S>& c1, std::span<const int> m);

/// Assembles the adaptive image for `map` and, when recording, attaches a
/// straight-through node from map.probs: the incoming gradient g is mapped to
/// d(probs)[p] = mean_c g[c,p] * (reference - image)[c,p] / m[p].
/// With surrogate disabled the node is omitted and the image is a constant.
template <typename S>
Tensor<S> simulate_adaptive(const SamplingMap<S>& map, const SppStack<S>& stack,
                            const Tensor<S>& reference, bool surrogate);

}  // namespace mcdk::sampling
