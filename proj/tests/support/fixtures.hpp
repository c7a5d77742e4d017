// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "mcdk/core/random.hpp"
#include "mcdk/nn/networks.hpp"
#include "mcdk/render/dataset.hpp"

namespace mcdk::testing {

template <typename S>
Tensor<S> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<S> t(std::move(shape));
  for (S& v : t.mutable_data()) v = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

/// A frame with a smooth random reference and stack levels whose noise
/// shrinks as 1/sqrt(spp). No rendering involved.
render::FrameBundle synthetic_bundle(Index height, Index width, std::uint64_t seed,
                                     int frame_index = 0);

/// The smallest network configuration that still exercises every block:
/// one pooling level in each network and a 4-kernel, 3x3 pool.
nn::NetworkConfig tiny_network();

/// Fresh, empty directory under the system temp path.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace mcdk::testing
