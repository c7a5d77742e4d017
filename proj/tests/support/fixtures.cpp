// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <cmath>

namespace mcdk::testing {

render::FrameBundle synthetic_bundle(Index height, Index width, std::uint64_t seed,
                                     int frame_index) {
  Rng rng(hash_values({seed, static_cast<std::uint64_t>(frame_index)}));
  render::FrameBundle b;
  b.frame_index = frame_index;
  b.seed = seed;
  const Index plane = height * width;
  b.reference = Tensor<float>(Shape{3, height, width});
  const double fx = rng.uniform(0.5, 3.0), fy = rng.uniform(0.5, 3.0);
  const double phase = 0.3 * frame_index;
  for (Index c = 0; c < 3; ++c) {
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        const double v = 0.6 + 0.4 * std::sin(fx * x / width * 6.28 + phase + c) *
                                   std::cos(fy * y / height * 6.28);
        b.reference[c * plane + y * width + x] = static_cast<float>(v);
      }
    }
  }
  for (int level = 0; level < 6; ++level) {
    Tensor<float> img(Shape{3, height, width});
    const double sigma = 0.5 / std::sqrt(static_cast<double>(1 << level));
    for (Index i = 0; i < img.size(); ++i) {
      img[i] = static_cast<float>(std::max(0.0, b.reference[i] + rng.normal(sigma)));
    }
    b.spp_stack[static_cast<std::size_t>(level)] = img;
  }
  b.gbuffers = Tensor<float>(Shape{5, height, width});
  b.albedo_rgb = Tensor<float>(Shape{3, height, width});
  for (Index p = 0; p < plane; ++p) {
    b.gbuffers[p] = static_cast<float>(rng.uniform(0.2, 0.8));
    for (Index c = 0; c < 3; ++c) {
      b.gbuffers[(1 + c) * plane + p] = static_cast<float>(rng.uniform(0.0, 1.0));
      b.albedo_rgb[c * plane + p] = static_cast<float>(rng.uniform(0.1, 0.9));
    }
    b.gbuffers[4 * plane + p] = 0.2126f * b.albedo_rgb[p] + 0.7152f * b.albedo_rgb[plane + p] +
                                0.0722f * b.albedo_rgb[2 * plane + p];
  }
  return b;
}

nn::NetworkConfig tiny_network() {
  nn::NetworkConfig c;
  c.sampling_widths = {4, 8};
  c.denoising_widths = {8, 16};
  c.kernel_count = 4;
  c.kernel_size = 3;
  c.descriptor_dim = 2;
  c.kernel_head_width = 4;
  c.pool_hidden = 4;
  c.attention_heads = 4;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mcdk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mcdk::testing
