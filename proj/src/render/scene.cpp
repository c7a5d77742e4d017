// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/render/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mcdk/core/error.hpp"

namespace mcdk::render {
namespace {

using nlohmann::json;

Material diffuse(double r, double g, double b) {
  Material m;
  m.albedo = Vec3(r, g, b);
  return m;
}

Material glossy(double r, double g, double b, double roughness) {
  Material m = diffuse(r, g, b);
  m.roughness = roughness;
  return m;
}

Material light(double r, double g, double b) {
  Material m;
  m.albedo = Vec3::Zero();
  m.emission = Vec3(r, g, b);
  return m;
}

Primitive box(Vec3 lo, Vec3 hi, Material m) { return Primitive{Box{lo, hi}, m}; }
Primitive sphere(Vec3 c, double r, Material m) { return Primitive{Sphere{c, r}, m}; }

Scene box_room() {
  Scene s;
  s.name = "box_room";
  s.vfov_degrees = 50.0;
  const Material white = diffuse(0.73, 0.73, 0.73);
  auto& p = s.primitives;
  p.push_back(box({-1.0, -0.05, -1.0}, {1.0, 0.0, 3.0}, white));     // floor
  p.push_back(box({-1.0, 2.0, -1.0}, {1.0, 2.05, 3.0}, white));      // ceiling
  p.push_back(box({-1.0, 0.0, -1.05}, {1.0, 2.0, -1.0}, white));     // back
  p.push_back(box({-1.05, 0.0, -1.0}, {-1.0, 2.0, 3.0}, diffuse(0.63, 0.065, 0.05)));
  p.push_back(box({1.0, 0.0, -1.0}, {1.05, 2.0, 3.0}, diffuse(0.14, 0.45, 0.091)));
  p.push_back(box({-0.25, 1.78, -0.45}, {0.25, 1.8, 0.05}, light(12.0, 10.5, 8.0)));
  p.push_back(sphere({0.7, 1.5, 0.6}, 0.15, light(12.0, 6.5, 3.0)));
  p.push_back(sphere({0.4, 0.35, -0.25}, 0.35, glossy(0.9, 0.9, 0.9, 0.15)));
  p.push_back(box({-0.75, 0.0, -0.7}, {-0.15, 0.95, -0.1}, white));
  p.push_back(sphere({-0.35, 0.2, 0.55}, 0.2, diffuse(0.8, 0.7, 0.2)));
  s.key_nodes = {look_at({-0.35, 1.0, 2.8}, {0.0, 0.85, 0.0}),
                 look_at({0.35, 1.1, 2.6}, {0.0, 0.8, 0.0})};
  s.camera = s.key_nodes.front();
  return s;
}

Scene sphere_grid() {
  Scene s;
  s.name = "sphere_grid";
  s.vfov_degrees = 45.0;
  s.environment = Vec3(0.35, 0.45, 0.6);
  auto& p = s.primitives;
  p.push_back(box({-6.0, -0.1, -6.0}, {6.0, 0.0, 6.0}, diffuse(0.5, 0.5, 0.5)));
  p.push_back(sphere({5.0, 7.0, 2.0}, 1.2, light(24.0, 21.0, 16.0)));
  p.push_back(sphere({-3.0, 2.5, -2.0}, 0.45, light(12.0, 18.0, 27.0)));
  const Vec3 colors[3] = {{0.8, 0.25, 0.2}, {0.25, 0.7, 0.3}, {0.25, 0.35, 0.85}};
  const double roughness[3] = {1.0, 0.3, 0.05};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3 c = colors[(i + j) % 3];
      p.push_back(sphere({(j - 1) * 1.1, 0.4, (i - 1) * 1.1}, 0.4,
                         glossy(c.x(), c.y(), c.z(), roughness[i])));
    }
  }
  s.key_nodes = {look_at({-0.8, 2.4, 4.6}, {0.0, 0.3, 0.0}),
                 look_at({0.9, 2.1, 4.4}, {0.0, 0.4, 0.0})};
  s.camera = s.key_nodes.front();
  return s;
}

Scene mirror_corridor() {
  Scene s;
  s.name = "mirror_corridor";
  s.vfov_degrees = 55.0;
  s.environment = Vec3(0.02, 0.02, 0.03);
  const Material wall = diffuse(0.7, 0.7, 0.68);
  const Material mirror = glossy(0.9, 0.9, 0.92, 0.04);
  auto& p = s.primitives;
  p.push_back(box({-1.2, -0.05, -9.0}, {1.2, 0.0, 3.0}, diffuse(0.55, 0.5, 0.45)));
  p.push_back(box({-1.2, 2.2, -9.0}, {1.2, 2.25, 3.0}, wall));
  p.push_back(box({-1.25, 0.0, -9.0}, {-1.2, 2.2, 3.0}, mirror));
  p.push_back(box({1.2, 0.0, -9.0}, {1.25, 2.2, 3.0}, mirror));
  p.push_back(box({-1.2, 0.0, -9.05}, {1.2, 2.2, -9.0}, diffuse(0.7, 0.4, 0.3)));
  p.push_back(box({-0.3, 1.98, -1.4}, {0.3, 2.0, -0.8}, light(18.0, 17.0, 15.0)));
  p.push_back(box({-0.3, 1.98, -5.6}, {0.3, 2.0, -5.0}, light(18.0, 14.0, 10.0)));
  p.push_back(sphere({-0.55, 0.3, -2.5}, 0.3, diffuse(0.2, 0.5, 0.8)));
  p.push_back(box({0.2, 0.0, -4.2}, {0.8, 0.7, -3.6}, diffuse(0.8, 0.8, 0.3)));
  p.push_back(sphere({0.3, 0.5, -6.8}, 0.5, glossy(0.95, 0.8, 0.6, 0.2)));
  s.key_nodes = {look_at({0.1, 1.2, 2.4}, {0.0, 0.9, -4.0}),
                 look_at({-0.1, 1.1, 1.4}, {0.1, 0.85, -4.0})};
  s.camera = s.key_nodes.front();
  return s;
}

Vec3 read_vec3(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("scene: missing key '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(std::string("scene: '") + key + "' must be an array of 3 numbers");
  }
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

CameraPose read_pose(const json& j) {
  const Vec3 position = read_vec3(j, "position");
  if (j.contains("look_at")) {
    const Vec3 up = j.contains("up") ? read_vec3(j, "up") : Vec3::UnitY();
    return look_at(position, read_vec3(j, "look_at"), up);
  }
  if (j.contains("orientation")) {
    const json& q = j.at("orientation");
    if (!q.is_array() || q.size() != 4) {
      throw ConfigError("scene: 'orientation' must be a quaternion [w, x, y, z]");
    }
    Quat orientation(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                     q[3].get<double>());
    if (orientation.norm() < 1e-12) throw ConfigError("scene: zero orientation quaternion");
    return CameraPose{position, orientation.normalized()};
  }
  throw ConfigError("scene: pose needs 'look_at' or 'orientation'");
}

Material read_material(const json& j) {
  Material m;
  if (j.contains("albedo")) m.albedo = read_vec3(j, "albedo");
  if (j.contains("roughness")) m.roughness = j.at("roughness").get<double>();
  if (j.contains("emission")) m.emission = read_vec3(j, "emission");
  return m;
}

}  // namespace

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = target - eye;
  if (forward.norm() < 1e-12) throw ConfigError("camera: zero view direction");
  const Vec3 f = forward.normalized();
  const Vec3 right = f.cross(up);
  if (right.norm() < 1e-12) throw ConfigError("camera: view direction parallel to up vector");
  const Vec3 r = right.normalized();
  Eigen::Matrix3d rotation;
  rotation.col(0) = r;
  rotation.col(1) = r.cross(f);
  rotation.col(2) = -f;
  return CameraPose{eye, Quat(rotation).normalized()};
}

void Scene::validate() const {
  if (!(vfov_degrees > 0.0 && vfov_degrees < 180.0)) {
    throw ConfigError("scene: vertical FOV must be in (0, 180) degrees, got " +
                      std::to_string(vfov_degrees));
  }
  if (camera.orientation.norm() < 1e-12) throw ConfigError("scene: degenerate camera orientation");
  bool has_emitter = false;
  for (const auto& p : primitives) {
    has_emitter = has_emitter || p.material.emissive();
    if (const auto* s = std::get_if<Sphere>(&p.shape); s && !(s->radius > 0)) {
      throw ConfigError("scene: sphere radius must be positive");
    }
    if (const auto* b = std::get_if<Box>(&p.shape); b && !(b->hi.array() > b->lo.array()).all()) {
      throw ConfigError("scene: box max corner must exceed min corner on every axis");
    }
    if (p.material.roughness < 0 || (p.material.albedo.array() < 0).any() ||
        (p.material.emission.array() < 0).any()) {
      throw ConfigError("scene: material values must be non-negative");
    }
  }
  if (!has_emitter) throw ConfigError("scene: at least one primitive must be emissive");
}

double Scene::bounding_radius() const {
  Eigen::AlignedBox3d bounds;
  for (const auto& p : primitives) {
    if (const auto* s = std::get_if<Sphere>(&p.shape)) {
      bounds.extend(s->center - Vec3::Constant(s->radius));
      bounds.extend(s->center + Vec3::Constant(s->radius));
    } else {
      const Box& b = std::get<Box>(p.shape);
      bounds.extend(b.lo);
      bounds.extend(b.hi);
    }
  }
  if (bounds.isEmpty()) return 1.0;
  return 0.5 * bounds.diagonal().norm();
}

std::vector<CameraPose> interpolate_trajectory(const std::vector<CameraPose>& key_nodes,
                                               int frame_count) {
  if (key_nodes.size() < 2) {
    throw ConfigError("trajectory: need at least 2 key nodes, got " +
                      std::to_string(key_nodes.size()));
  }
  if (frame_count < 1) throw ConfigError("trajectory: frame count must be >= 1");
  const auto segments = static_cast<int>(key_nodes.size()) - 1;
  std::vector<CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(frame_count));
  for (int f = 0; f < frame_count; ++f) {
    if (f == frame_count - 1 && frame_count > 1) {
      poses.push_back(key_nodes.back());
      continue;
    }
    const double t = frame_count == 1 ? 0.0 : static_cast<double>(f) * segments / (frame_count - 1);
    const int seg = std::min(segments - 1, static_cast<int>(std::floor(t)));
    const double u = t - seg;
    const CameraPose& a = key_nodes[static_cast<std::size_t>(seg)];
    const CameraPose& b = key_nodes[static_cast<std::size_t>(seg) + 1];
    if (u == 0.0) {
      poses.push_back(a);
      continue;
    }
    poses.push_back(CameraPose{a.position + u * (b.position - a.position),
                               a.orientation.slerp(u, b.orientation)});
  }
  return poses;
}

std::vector<std::string> builtin_scene_names() {
  return {"box_room", "sphere_grid", "mirror_corridor"};
}

Scene builtin_scene(const std::string& name) {
  if (name == "box_room") return box_room();
  if (name == "sphere_grid") return sphere_grid();
  if (name == "mirror_corridor") return mirror_corridor();
  throw ConfigError("unknown built-in scene '" + name + "'");
}

Scene parse_scene(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: invalid JSON: ") + e.what());
  }
  try {
    Scene s;
    s.name = j.value("name", "scene");
    if (!j.contains("camera")) throw ConfigError("scene: missing key 'camera'");
    s.camera = read_pose(j.at("camera"));
    s.vfov_degrees = j.at("camera").value("vfov", 45.0);
    if (j.contains("environment")) s.environment = read_vec3(j, "environment");

    std::map<std::string, Material> materials;
    if (j.contains("materials")) {
      for (const auto& [name, m] : j.at("materials").items()) materials[name] = read_material(m);
    }
    if (!j.contains("primitives")) throw ConfigError("scene: missing key 'primitives'");
    for (const json& pj : j.at("primitives")) {
      Material m;
      if (pj.contains("material")) {
        const json& mj = pj.at("material");
        if (mj.is_string()) {
          const auto it = materials.find(mj.get<std::string>());
          if (it == materials.end()) {
            throw ConfigError("scene: unknown material '" + mj.get<std::string>() + "'");
          }
          m = it->second;
        } else {
          m = read_material(mj);
        }
      }
      const std::string type = pj.value("type", "");
      if (type == "sphere") {
        s.primitives.push_back(sphere(read_vec3(pj, "center"), pj.at("radius").get<double>(), m));
      } else if (type == "box") {
        s.primitives.push_back(box(read_vec3(pj, "min"), read_vec3(pj, "max"), m));
      } else {
        throw ConfigError("scene: primitive type must be 'sphere' or 'box', got '" + type + "'");
      }
    }
    if (j.contains("key_nodes")) {
      for (const json& k : j.at("key_nodes")) s.key_nodes.push_back(read_pose(k));
    } else {
      s.key_nodes = {s.camera, s.camera};
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene(buffer.str());
}

Scene resolve_scene(const std::string& name_or_path) {
  for (const auto& name : builtin_scene_names()) {
    if (name == name_or_path) return builtin_scene(name);
  }
  if (!std::filesystem::exists(name_or_path)) {
    throw ConfigError("'" + name_or_path + "' is neither a built-in scene nor a file");
  }
  return load_scene(name_or_path);
}

}  // namespace mcdk::render
