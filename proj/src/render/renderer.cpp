// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/render/renderer.hpp"

#include <cmath>
#include <numbers>

#include "mcdk/core/error.hpp"
#include "mcdk/core/parallel.hpp"
#include "mcdk/core/random.hpp"

namespace mcdk::render {
namespace {

constexpr double kPi = std::numbers::pi;

// Orthonormal basis around n (Duff et al. branchless construction).
void basis(const Vec3& n, Vec3& t, Vec3& b) {
  const double sign = std::copysign(1.0, n.z());
  const double a = -1.0 / (sign + n.z());
  const double c = n.x() * n.y() * a;
  t = Vec3(1.0 + sign * n.x() * n.x() * a, sign * c, -sign * n.x());
  b = Vec3(c, sign + n.y() * n.y() * a, -n.y());
}

bool hit_sphere(const Sphere& s, const Vec3& o, const Vec3& d, double t_min, double t_max,
                double& t) {
  const Vec3 oc = o - s.center;
  const double half_b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = half_b * half_b - c;
  if (disc < 0) return false;
  const double root = std::sqrt(disc);
  double cand = -half_b - root;
  if (cand <= t_min || cand >= t_max) {
    cand = -half_b + root;
    if (cand <= t_min || cand >= t_max) return false;
  }
  t = cand;
  return true;
}

bool hit_box(const Box& box, const Vec3& o, const Vec3& d, double t_min, double t_max,
             double& t) {
  double near = -std::numeric_limits<double>::infinity();
  double far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double inv = 1.0 / d[a];
    double t0 = (box.lo[a] - o[a]) * inv;
    double t1 = (box.hi[a] - o[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    near = std::max(near, t0);
    far = std::min(far, t1);
  }
  if (near > far) return false;
  if (near > t_min && near < t_max) {
    t = near;
    return true;
  }
  if (far > t_min && far < t_max) {
    t = far;
    return true;
  }
  return false;
}

Vec3 box_normal(const Box& box, const Vec3& p) {
  int axis = 0;
  double best = std::numeric_limits<double>::infinity();
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double dl = std::abs(p[a] - box.lo[a]);
    const double dh = std::abs(p[a] - box.hi[a]);
    if (dl < best) {
      best = dl;
      axis = a;
      sign = -1.0;
    }
    if (dh < best) {
      best = dh;
      axis = a;
      sign = 1.0;
    }
  }
  Vec3 n = Vec3::Zero();
  n[axis] = sign;
  return n;
}

double box_area(const Box& b) {
  const Vec3 e = b.hi - b.lo;
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

}  // namespace

/// Counter-based generator: a hashed key followed by a SplitMix64 sequence.
class Renderer::SampleRng {
 public:
  explicit SampleRng(std::uint64_t state) : state_(state) {}
  double next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return static_cast<double>(mix64(state_) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

Renderer::Renderer(Scene scene) : scene_(std::move(scene)) {
  scene_.validate();
  for (std::size_t i = 0; i < scene_.primitives.size(); ++i) {
    if (scene_.primitives[i].material.emissive()) emitters_.push_back(static_cast<int>(i));
  }
  epsilon_ = 1e-7 * std::max(1.0, scene_.bounding_radius());
  tan_half_fov_ = std::tan(scene_.vfov_degrees * kPi / 360.0);
}

void Renderer::check(int spp, ImageSize size) const {
  if (spp < 1) throw ConfigError("render: spp must be >= 1, got " + std::to_string(spp));
  if (size.height < 8 || size.width < 8) {
    throw ConfigError("render: image must be at least 8x8, got " + std::to_string(size.height) +
                      "x" + std::to_string(size.width));
  }
}

bool Renderer::intersect(const Vec3& origin, const Vec3& dir, double t_max, Hit& hit) const {
  bool found = false;
  double closest = t_max;
  for (std::size_t i = 0; i < scene_.primitives.size(); ++i) {
    double t = 0;
    const auto& shape = scene_.primitives[i].shape;
    const bool ok = std::holds_alternative<Sphere>(shape)
                        ? hit_sphere(std::get<Sphere>(shape), origin, dir, epsilon_, closest, t)
                        : hit_box(std::get<Box>(shape), origin, dir, epsilon_, closest, t);
    if (ok) {
      closest = t;
      hit.t = t;
      hit.primitive = static_cast<int>(i);
      found = true;
    }
  }
  if (!found) return false;
  const Vec3 p = origin + hit.t * dir;
  const auto& shape = scene_.primitives[static_cast<std::size_t>(hit.primitive)].shape;
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    hit.normal = (p - s->center) / s->radius;
  } else {
    hit.normal = box_normal(std::get<Box>(shape), p);
  }
  if (hit.normal.dot(dir) > 0) hit.normal = -hit.normal;
  return true;
}

bool Renderer::occluded(const Vec3& origin, const Vec3& dir, double t_max) const {
  Hit hit;
  return intersect(origin, dir, t_max, hit);
}

Vec3 Renderer::camera_ray(const CameraPose& pose, double px, double py, ImageSize size) const {
  const double aspect = static_cast<double>(size.width) / static_cast<double>(size.height);
  const double u = (2.0 * px / static_cast<double>(size.width) - 1.0) * tan_half_fov_ * aspect;
  const double v = (1.0 - 2.0 * py / static_cast<double>(size.height)) * tan_half_fov_;
  return (pose.orientation * Vec3(u, v, -1.0)).normalized();
}

Vec3 Renderer::sample_emitter(const Vec3& position, const Vec3& normal, SampleRng& rng) const {
  const auto count = emitters_.size();
  const auto pick = std::min(count - 1, static_cast<std::size_t>(rng.next() * count));
  const Primitive& light = scene_.primitives[static_cast<std::size_t>(emitters_[pick])];
  const double u1 = rng.next(), u2 = rng.next(), u3 = rng.next();
  Vec3 point, light_normal;
  double area = 0;
  if (const auto* s = std::get_if<Sphere>(&light.shape)) {
    const double z = 1.0 - 2.0 * u1;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 2.0 * kPi * u2;
    light_normal = Vec3(r * std::cos(phi), r * std::sin(phi), z);
    point = s->center + s->radius * light_normal;
    area = 4.0 * kPi * s->radius * s->radius;
  } else {
    const Box& b = std::get<Box>(light.shape);
    const Vec3 e = b.hi - b.lo;
    const double faces[3] = {e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};
    area = box_area(b);
    double pick_area = u3 * area * 0.5;
    int axis = 0;
    while (axis < 2 && pick_area >= faces[axis]) {
      pick_area -= faces[axis];
      ++axis;
    }
    const bool high = rng.next() < 0.5;
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    point[axis] = high ? b.hi[axis] : b.lo[axis];
    point[a1] = b.lo[a1] + u1 * e[a1];
    point[a2] = b.lo[a2] + u2 * e[a2];
    light_normal = Vec3::Zero();
    light_normal[axis] = high ? 1.0 : -1.0;
  }
  Vec3 to_light = point - position;
  const double dist2 = to_light.squaredNorm();
  const double dist = std::sqrt(dist2);
  to_light /= dist;
  const double cos_surface = normal.dot(to_light);
  const double cos_light = std::abs(light_normal.dot(to_light));
  if (cos_surface <= 0 || cos_light <= 0) return Vec3::Zero();
  if (occluded(position + epsilon_ * 10.0 * normal, to_light, dist * (1.0 - 1e-6))) {
    return Vec3::Zero();
  }
  const double weight = cos_surface * cos_light * area * static_cast<double>(count) / (dist2 * kPi);
  return light.material.emission * weight;
}

Vec3 Renderer::trace(const Vec3& origin_in, Vec3 dir, SampleRng& rng) const {
  Vec3 radiance = Vec3::Zero();
  Vec3 throughput = Vec3::Ones();
  Vec3 origin = origin_in;
  bool count_emission = true;
  for (int bounce = 0; bounce < kMaxBounces; ++bounce) {
    Hit hit;
    if (!intersect(origin, dir, std::numeric_limits<double>::infinity(), hit)) {
      radiance += throughput.cwiseProduct(scene_.environment);
      break;
    }
    const Material& mat = scene_.primitives[static_cast<std::size_t>(hit.primitive)].material;
    if (count_emission) radiance += throughput.cwiseProduct(mat.emission);
    const Vec3 position = origin + hit.t * dir;
    const Vec3& n = hit.normal;
    if (mat.diffuse()) {
      radiance += throughput.cwiseProduct(mat.albedo).cwiseProduct(
          sample_emitter(position, n, rng));
      const double u1 = rng.next(), u2 = rng.next();
      const double r = std::sqrt(u1);
      const double phi = 2.0 * kPi * u2;
      Vec3 t, b;
      basis(n, t, b);
      dir = (r * std::cos(phi) * t + r * std::sin(phi) * b + std::sqrt(std::max(0.0, 1.0 - u1)) * n)
                .normalized();
      count_emission = false;
    } else {
      Vec3 reflected = dir - 2.0 * dir.dot(n) * n;
      Vec3 fuzz;
      do {
        fuzz = Vec3(2.0 * rng.next() - 1.0, 2.0 * rng.next() - 1.0, 2.0 * rng.next() - 1.0);
      } while (fuzz.squaredNorm() > 1.0);
      dir = (reflected + mat.roughness * fuzz).normalized();
      if (dir.dot(n) <= 0) break;
      count_emission = true;
    }
    throughput = throughput.cwiseProduct(mat.albedo);
    origin = position + epsilon_ * 10.0 * n;
  }
  return radiance;
}

Vec3 Renderer::radiance_sample(const CameraPose& pose, Index x, Index y, int sample,
                               const SampleKey& key, ImageSize size) const {
  SampleRng rng(hash_values({key.seed, key.frame_index, static_cast<std::uint64_t>(x),
                             static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(sample),
                             key.stream}));
  const double jx = rng.next(), jy = rng.next();
  const Vec3 dir = camera_ray(pose, static_cast<double>(x) + jx, static_cast<double>(y) + jy, size);
  return trace(pose.position, dir, rng);
}

Tensor<float> Renderer::render(const CameraPose& pose, int spp, const SampleKey& key,
                               ImageSize size) const {
  check(spp, size);
  const Index h = size.height, w = size.width, plane = h * w;
  Tensor<float> out(Shape{3, h, w});
  float* data = out.mutable_ptr();
  parallel_for(0, h, [&](Index y) {
    for (Index x = 0; x < w; ++x) {
      Vec3 acc = Vec3::Zero();
      for (int s = 0; s < spp; ++s) acc += radiance_sample(pose, x, y, s, key, size);
      acc /= static_cast<double>(spp);
      for (int c = 0; c < 3; ++c) data[c * plane + y * w + x] = static_cast<float>(acc[c]);
    }
  });
  return out;
}

std::vector<Vec3> Renderer::pixel_samples(const CameraPose& pose, Index x, Index y, int first,
                                          int count, const SampleKey& key, ImageSize size) const {
  check(1, size);
  std::vector<Vec3> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (int s = first; s < first + count; ++s) {
    samples.push_back(radiance_sample(pose, x, y, s, key, size));
  }
  return samples;
}

GBuffers Renderer::render_gbuffers(const CameraPose& pose, ImageSize size) const {
  check(1, size);
  const Index h = size.height, w = size.width, plane = h * w;
  GBuffers out{Tensor<float>(Shape{5, h, w}), Tensor<float>(Shape{3, h, w})};
  float* g = out.gbuffers.mutable_ptr();
  float* a = out.albedo_rgb.mutable_ptr();
  const double depth_scale = 1.0 / (2.0 * scene_.bounding_radius());
  parallel_for(0, h, [&](Index y) {
    for (Index x = 0; x < w; ++x) {
      const Index p = y * w + x;
      const Vec3 dir =
          camera_ray(pose, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, size);
      Hit hit;
      if (!intersect(pose.position, dir, std::numeric_limits<double>::infinity(), hit)) {
        g[p] = 1.0f;
        for (int c = 0; c < 3; ++c) g[(1 + c) * plane + p] = 0.5f;
        continue;  // albedo stays 0
      }
      const Material& mat = scene_.primitives[static_cast<std::size_t>(hit.primitive)].material;
      g[p] = static_cast<float>(std::min(1.0, hit.t * depth_scale));
      for (int c = 0; c < 3; ++c) {
        g[(1 + c) * plane + p] = static_cast<float>(0.5 * (hit.normal[c] + 1.0));
        a[c * plane + p] = static_cast<float>(mat.albedo[c]);
      }
      g[4 * plane + p] = static_cast<float>(luminance(mat.albedo));
    }
  });
  return out;
}

}  // namespace mcdk::render
