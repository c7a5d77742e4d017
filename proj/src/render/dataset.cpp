// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/render/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "mcdk/core/error.hpp"
#include "mcdk/core/tns.hpp"
#include "mcdk/io/image.hpp"

namespace mcdk::render {
namespace fs = std::filesystem;

std::string frame_dir_name(int frame_index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%04d", frame_index);
  return name;
}

FrameBundle render_bundle(const Renderer& renderer, const CameraPose& pose, int frame_index,
                          const DatasetSettings& settings) {
  if (settings.reference_spp < 1) throw ConfigError("reference spp must be >= 1");
  FrameBundle bundle;
  bundle.frame_index = frame_index;
  bundle.seed = settings.seed;
  const auto frame = static_cast<std::uint64_t>(frame_index);
  for (int level = 0; level < sampling::kStackLevels; ++level) {
    bundle.spp_stack[static_cast<std::size_t>(level)] = renderer.render(
        pose, 1 << level, SampleKey{settings.seed, frame, static_cast<std::uint64_t>(level)},
        settings.size);
  }
  bundle.reference = renderer.render(pose, settings.reference_spp,
                                     SampleKey{settings.seed, frame, kReferenceStream},
                                     settings.size);
  GBuffers g = renderer.render_gbuffers(pose, settings.size);
  bundle.gbuffers = g.gbuffers;
  bundle.albedo_rgb = g.albedo_rgb;
  return bundle;
}

std::vector<FrameBundle> build_dataset(const Scene& scene, const DatasetSettings& settings) {
  if (settings.frames < 1) throw ConfigError("dataset: frames must be >= 1");
  const Renderer renderer(scene);
  const auto poses = interpolate_trajectory(scene.key_nodes, settings.frames);
  std::vector<FrameBundle> bundles;
  bundles.reserve(poses.size());
  for (std::size_t f = 0; f < poses.size(); ++f) {
    bundles.push_back(render_bundle(renderer, poses[f], static_cast<int>(f), settings));
  }
  return bundles;
}

void save_bundle(const fs::path& dir, const FrameBundle& bundle) {
  fs::create_directories(dir);
  for (int level = 0; level < sampling::kStackLevels; ++level) {
    const auto& image = bundle.spp_stack[static_cast<std::size_t>(level)];
    const std::string name = "c_" + std::to_string(1 << level);
    save_tns(dir / (name + ".tns"), image);
    save_ppm(dir / (name + ".ppm"), tone_map(image));
  }
  save_tns(dir / "gbuf.tns", bundle.gbuffers);
  save_tns(dir / "albedo.tns", bundle.albedo_rgb);
  save_tns(dir / "ref.tns", bundle.reference);
  save_ppm(dir / "ref.ppm", tone_map(bundle.reference));
  save_ppm(dir / "albedo.ppm", bundle.albedo_rgb);
  nlohmann::json meta = {{"frame_index", bundle.frame_index}, {"seed", bundle.seed}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

FrameBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing frame directory " + dir.string());
  FrameBundle bundle;
  for (int level = 0; level < sampling::kStackLevels; ++level) {
    const fs::path file = dir / ("c_" + std::to_string(1 << level) + ".tns");
    if (!fs::exists(file)) {
      throw DataError("missing stack level c_" + std::to_string(1 << level) + " in " +
                      dir.string());
    }
    bundle.spp_stack[static_cast<std::size_t>(level)] = load_tns(file);
  }
  bundle.gbuffers = load_tns(dir / "gbuf.tns");
  bundle.albedo_rgb = load_tns(dir / "albedo.tns");
  bundle.reference = load_tns(dir / "ref.tns");
  const Shape image{3, bundle.reference.dim(-2), bundle.reference.dim(-1)};
  for (const auto& level : bundle.spp_stack) {
    if (level.shape() != image) throw DataError("inconsistent image shapes in " + dir.string());
  }
  if (bundle.albedo_rgb.shape() != image ||
      bundle.gbuffers.shape() != Shape{5, image[1], image[2]}) {
    throw DataError("inconsistent auxiliary buffer shapes in " + dir.string());
  }
  if (fs::exists(dir / "meta.json")) {
    std::ifstream in(dir / "meta.json");
    const auto meta = nlohmann::json::parse(in);
    bundle.frame_index = meta.value("frame_index", 0);
    bundle.seed = meta.value("seed", std::uint64_t{0});
  }
  return bundle;
}

void save_dataset(const fs::path& root, const std::vector<FrameBundle>& bundles) {
  for (const auto& b : bundles) save_bundle(root / frame_dir_name(b.frame_index), b);
}

namespace {

std::vector<fs::path> frame_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("frame_", 0) == 0) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

std::vector<FrameBundle> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("missing dataset directory " + root.string());
  std::vector<FrameBundle> bundles;
  for (const auto& dir : frame_dirs(root)) bundles.push_back(load_bundle(dir));
  if (bundles.empty()) throw DataError("no frame directories in " + root.string());
  return bundles;
}

std::vector<std::vector<FrameBundle>> load_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("missing dataset directory " + root.string());
  if (!frame_dirs(root).empty()) return {load_dataset(root)};
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<std::vector<FrameBundle>> sequences;
  for (const auto& dir : subdirs) {
    if (!frame_dirs(dir).empty()) sequences.push_back(load_dataset(dir));
  }
  if (sequences.empty()) throw DataError("no frame sequences under " + root.string());
  return sequences;
}

}  // namespace mcdk::render
