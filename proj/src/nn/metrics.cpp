// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/nn/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace mcdk::nn {
namespace {

using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_pair(const Tensor<float>& a, const Tensor<float>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

Image channel(const Tensor<float>& t, Index c) {
  const Index h = t.dim(-2), w = t.dim(-1);
  Image img(h, w);
  const float* base = t.ptr() + c * h * w;
  for (Index i = 0; i < h * w; ++i) img(i / w, i % w) = base[i];
  return img;
}

// Valid-mode separable filtering with a symmetric 1D kernel.
Image filter_valid(const Image& x, const Eigen::ArrayXd& k) {
  const Index n = k.size();
  const Index h = x.rows(), w = x.cols();
  Image rows(h, w - n + 1);
  for (Index j = 0; j + n <= w; ++j) rows.col(j) = x.middleCols(j, n).matrix() * k.matrix();
  Image out(h - n + 1, w - n + 1);
  for (Index i = 0; i + n <= h; ++i) {
    out.row(i) = (k.matrix().transpose() * rows.middleRows(i, n).matrix()).array();
  }
  return out;
}

Eigen::ArrayXd gaussian_window(Index size, double sigma) {
  Eigen::ArrayXd k(size);
  const double c = (size - 1) / 2.0;
  for (Index i = 0; i < size; ++i) k[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
  return k / k.sum();
}

}  // namespace

double psnr(const Tensor<float>& predicted, const Tensor<float>& reference) {
  check_pair(predicted, reference, "psnr");
  double mse = 0;
  for (Index i = 0; i < predicted.size(); ++i) {
    const double e = static_cast<double>(predicted[i]) - reference[i];
    mse += e * e;
  }
  mse /= static_cast<double>(predicted.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor<float>& predicted, const Tensor<float>& reference) {
  check_pair(predicted, reference, "ssim");
  constexpr Index kWindow = 11;
  constexpr double kC1 = 1e-4, kC2 = 9e-4;
  const Index h = predicted.dim(-2), w = predicted.dim(-1);
  if (h < kWindow || w < kWindow) {
    throw DimensionError("ssim: images must be at least 11x11");
  }
  const Index channels = predicted.size() / (h * w);
  const Eigen::ArrayXd k = gaussian_window(kWindow, 1.5);
  double total = 0;
  for (Index c = 0; c < channels; ++c) {
    const Image x = channel(predicted, c), y = channel(reference, c);
    const Image mx = filter_valid(x, k), my = filter_valid(y, k);
    const Image sxx = filter_valid(x * x, k) - mx * mx;
    const Image syy = filter_valid(y * y, k) - my * my;
    const Image sxy = filter_valid(x * y, k) - mx * my;
    const Image map = ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
                      ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
    total += map.mean();
  }
  return total / static_cast<double>(channels);
}

double relative_mse(const Tensor<float>& predicted, const Tensor<float>& reference) {
  check_pair(predicted, reference, "relative_mse");
  double acc = 0;
  for (Index i = 0; i < predicted.size(); ++i) {
    const double r = reference[i];
    const double e = static_cast<double>(predicted[i]) - r;
    acc += e * e / (r * r + 0.01);
  }
  return acc / static_cast<double>(predicted.size());
}

ImageMetrics image_metrics(const Tensor<float>& predicted, const Tensor<float>& reference) {
  return ImageMetrics{psnr(predicted, reference), ssim(predicted, reference),
                      relative_mse(predicted, reference)};
}

double temporal_l1(const Tensor<float>& predicted, const Tensor<float>& predicted_previous,
                   const Tensor<float>& reference, const Tensor<float>& reference_previous) {
  check_pair(predicted, reference, "temporal_l1");
  check_pair(predicted, predicted_previous, "temporal_l1");
  check_pair(reference, reference_previous, "temporal_l1");
  double acc = 0;
  for (Index i = 0; i < predicted.size(); ++i) {
    const double dd = static_cast<double>(predicted[i]) - predicted_previous[i];
    const double dr = static_cast<double>(reference[i]) - reference_previous[i];
    acc += std::abs(dd - dr);
  }
  return acc / static_cast<double>(predicted.size());
}

double temporal_l1(const std::vector<Tensor<float>>& predicted,
                   const std::vector<Tensor<float>>& reference) {
  if (predicted.size() != reference.size() || predicted.size() < 2) {
    throw ConfigError("temporal_l1: need two equally long sequences of at least 2 frames");
  }
  double acc = 0;
  for (std::size_t t = 1; t < predicted.size(); ++t) {
    acc += temporal_l1(predicted[t], predicted[t - 1], reference[t], reference[t - 1]);
  }
  return acc / static_cast<double>(predicted.size() - 1);
}

}  // namespace mcdk::nn
