// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "mcdk/core/tensor.hpp"

namespace mcdk {

/// x / (1 + x) followed by gamma 1/2.2; maps linear radiance into [0,1).
float tone_map(float linear);
Tensor<float> tone_map(const Tensor<float>& linear);

/// Writes a binary PPM (P6). Images with 3 channels ([3,H,W] or [1,3,H,W])
/// are written as color, single-channel ones as gray. Values are expected in
/// [0,1] and are clamped.
void save_ppm(const std::filesystem::path& path, const Tensor<float>& image);

/// Reads a P6 PPM back into [3,H,W] with values in [0,1].
Tensor<float> load_ppm(const std::filesystem::path& path);

}  // namespace mcdk
