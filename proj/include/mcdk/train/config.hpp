// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "mcdk/nn/losses.hpp"
#include "mcdk/nn/pipeline.hpp"

namespace mcdk::train {

struct TrainConfig {
  nn::ModelKind model = nn::ModelKind::two_stage;
  nn::NetworkConfig network;
  /// For the uniform model: rescale denoiser widths to the two-stage
  /// model's parameter count before building it.
  bool match_baseline_parameters = true;
  nn::LossWeights weights;
  double budget = 4.0;
  int epochs = 100;
  double lr_max = 3e-4;
  double lr_min = 3e-6;
  double grad_clip = 10.0;
  int clip_length = 5;
  Index crop_size = 64;
  int clips_per_sequence = 4;
  Index validation_crop = 128;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const nn::NetworkConfig& config);
nn::NetworkConfig network_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

/// FNV-1a hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Checkpoint directory: one TNS file per parameter and manifest.json with
/// the model kind, network config, parameter table and config hash.
void save_checkpoint(const std::filesystem::path& dir, const nn::Denoiser<float>& model,
                     const nn::NetworkConfig& network, const nlohmann::json& extra = {});

struct LoadedModel {
  std::unique_ptr<nn::Denoiser<float>> model;
  nn::NetworkConfig network;
  nlohmann::json manifest;
};

LoadedModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace mcdk::train
