// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mcdk::render {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct Material {
  Vec3 albedo = Vec3::Constant(0.75);
  /// 1 is Lambertian; smaller values give a glossy mirror lobe.
  double roughness = 1.0;
  Vec3 emission = Vec3::Zero();

  bool emissive() const { return emission.maxCoeff() > 0.0; }
  bool diffuse() const { return roughness >= 1.0; }
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
};

struct Primitive {
  std::variant<Sphere, Box> shape;
  Material material;
};

/// Camera looks down its local -Z axis with +Y up.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

/// Orientation that points the camera from eye toward target.
CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

struct Scene {
  std::string name;
  CameraPose camera;
  double vfov_degrees = 45.0;
  std::vector<Primitive> primitives;
  std::vector<CameraPose> key_nodes;
  /// Radiance returned by rays leaving the scene.
  Vec3 environment = Vec3::Zero();

  /// Throws ConfigError when the scene cannot be rendered.
  void validate() const;
  /// Half-diagonal of the primitives' bounding box.
  double bounding_radius() const;
};

/// Poses spread evenly along the key-node polyline: positions are linearly
/// and orientations spherically interpolated between adjacent nodes.
std::vector<CameraPose> interpolate_trajectory(const std::vector<CameraPose>& key_nodes,
                                               int frame_count);

/// Names accepted by builtin_scene.
std::vector<std::string> builtin_scene_names();
Scene builtin_scene(const std::string& name);

/// Parses a JSON scene description; see README for the keys.
Scene parse_scene(const std::string& text);
Scene load_scene(const std::string& path);

/// A built-in scene name or a path to a JSON scene file.
Scene resolve_scene(const std::string& name_or_path);

}  // namespace mcdk::render
