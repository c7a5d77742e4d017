// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mcdk/core/tensor.hpp"

namespace mcdk::nn {

/// Image-quality metrics on tone-mapped images in [0,1]. Inputs are
/// [3,H,W] or [1,3,H,W]; PSNR is +infinity for identical images.
struct ImageMetrics {
  double psnr = 0;
  double ssim = 0;
  double rmse = 0;  // relative MSE
};

double psnr(const Tensor<float>& predicted, const Tensor<float>& reference);
/// Gaussian-windowed SSIM (11x11, sigma 1.5) over valid windows, averaged
/// over channels.
double ssim(const Tensor<float>& predicted, const Tensor<float>& reference);
/// mean((d - r)^2 / (r^2 + 0.01)).
double relative_mse(const Tensor<float>& predicted, const Tensor<float>& reference);
ImageMetrics image_metrics(const Tensor<float>& predicted, const Tensor<float>& reference);

/// mean |(d_t - d_{t-1}) - (r_t - r_{t-1})| between consecutive frames.
double temporal_l1(const Tensor<float>& predicted, const Tensor<float>& predicted_previous,
                   const Tensor<float>& reference, const Tensor<float>& reference_previous);
/// Average of temporal_l1 over all consecutive pairs of a sequence.
double temporal_l1(const std::vector<Tensor<float>>& predicted,
                   const std::vector<Tensor<float>>& reference);

}  // namespace mcdk::nn
