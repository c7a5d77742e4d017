// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mcdk/core/tensor.hpp"
#include "mcdk/render/renderer.hpp"
#include "mcdk/sampling/sampling.hpp"

namespace mcdk::render {

/// Random stream of the reference render; stack level i uses stream i.
inline constexpr std::uint64_t kReferenceStream = 1000;

/// Everything the denoiser consumes for one camera position.
struct FrameBundle {
  sampling::SppStack<float> spp_stack;  // level i: [3,H,W] at 2^i spp
  Tensor<float> gbuffers;               // [5,H,W]
  Tensor<float> albedo_rgb;             // [3,H,W]
  Tensor<float> reference;              // [3,H,W]
  int frame_index = 0;
  std::uint64_t seed = 0;

  Index height() const { return reference.dim(-2); }
  Index width() const { return reference.dim(-1); }
};

struct DatasetSettings {
  ImageSize size;
  int frames = 5;
  std::uint64_t seed = 0;
  int reference_spp = 1024;
};

FrameBundle render_bundle(const Renderer& renderer, const CameraPose& pose, int frame_index,
                          const DatasetSettings& settings);

/// One bundle per pose of the scene's interpolated key-node trajectory.
std::vector<FrameBundle> build_dataset(const Scene& scene, const DatasetSettings& settings);

/// Writes c_1.tns .. c_32.tns, gbuf.tns, albedo.tns, ref.tns, meta.json and
/// tone-mapped previews into `dir`.
void save_bundle(const std::filesystem::path& dir, const FrameBundle& bundle);
FrameBundle load_bundle(const std::filesystem::path& dir);

/// Frame directories frame_0000, frame_0001, ... under `root`.
void save_dataset(const std::filesystem::path& root, const std::vector<FrameBundle>& bundles);
std::vector<FrameBundle> load_dataset(const std::filesystem::path& root);

/// Frame sequences under `root`: either root itself holds frame directories
/// or each subdirectory (sorted by name) is one sequence.
std::vector<std::vector<FrameBundle>> load_sequences(const std::filesystem::path& root);

std::string frame_dir_name(int frame_index);

}  // namespace mcdk::render
