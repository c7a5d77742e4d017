// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "mcdk/core/tensor.hpp"
#include "mcdk/render/scene.hpp"

namespace mcdk::render {

/// Identifies one family of radiance samples. Renders that differ in any
/// field draw from disjoint random sequences.
struct SampleKey {
  std::uint64_t seed = 0;
  std::uint64_t frame_index = 0;
  std::uint64_t stream = 0;
};

struct ImageSize {
  Index height = 128;
  Index width = 128;
};

struct GBuffers {
  Tensor<float> gbuffers;    // [5,H,W]: depth, normal xyz in [0,1], gray albedo
  Tensor<float> albedo_rgb;  // [3,H,W]
};

inline constexpr int kMaxBounces = 3;

inline double luminance(const Vec3& rgb) {
  return 0.2126 * rgb.x() + 0.7152 * rgb.y() + 0.0722 * rgb.z();
}

/// Unidirectional path tracer with next-event estimation toward one
/// uniformly chosen emitter. Output is bit-identical for a given key
/// regardless of worker count.
class Renderer {
 public:
  explicit Renderer(Scene scene);

  const Scene& scene() const { return scene_; }

  /// Linear HDR radiance [3,H,W] averaged over spp samples per pixel.
  Tensor<float> render(const CameraPose& pose, int spp, const SampleKey& key,
                       ImageSize size) const;

  /// The individual radiance samples of one pixel, sample indices
  /// [first, first + count). render() averages samples [0, spp).
  std::vector<Vec3> pixel_samples(const CameraPose& pose, Index x, Index y, int first, int count,
                                  const SampleKey& key, ImageSize size) const;

  /// Noise-free primary-hit attributes through pixel centers.
  GBuffers render_gbuffers(const CameraPose& pose, ImageSize size) const;

 private:
  struct Hit {
    double t = 0;
    Vec3 normal;
    int primitive = -1;
  };
  class SampleRng;

  bool intersect(const Vec3& origin, const Vec3& dir, double t_max, Hit& hit) const;
  bool occluded(const Vec3& origin, const Vec3& dir, double t_max) const;
  Vec3 camera_ray(const CameraPose& pose, double px, double py, ImageSize size) const;
  Vec3 trace(const Vec3& origin, Vec3 dir, SampleRng& rng) const;
  Vec3 sample_emitter(const Vec3& position, const Vec3& normal, SampleRng& rng) const;
  Vec3 radiance_sample(const CameraPose& pose, Index x, Index y, int sample,
                       const SampleKey& key, ImageSize size) const;
  void check(int spp, ImageSize size) const;

  Scene scene_;
  std::vector<int> emitters_;
  double epsilon_ = 1e-6;
  double tan_half_fov_ = 0;
};

}  // namespace mcdk::render
