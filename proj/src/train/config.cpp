// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/train/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "mcdk/core/tns.hpp"

namespace mcdk::train {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

std::string parameter_file(const std::string& name) {
  std::string file = name;
  for (char& c : file) {
    if (c == '/') c = '.';
  }
  return file + ".tns";
}

}  // namespace

void TrainConfig::validate() const {
  network.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (budget < 1.0 || budget > sampling::kMaxSpp) throw ConfigError("budget must be in [1, 63]");
  if (clip_length < 1) throw ConfigError("clip_length must be >= 1");
  if (crop_size < 8) throw ConfigError("crop_size must be >= 8");
  if (clips_per_sequence < 1) throw ConfigError("clips_per_sequence must be >= 1");
  if (lr_max <= 0 || lr_min <= 0 || lr_min > lr_max) {
    throw ConfigError("learning rates must satisfy 0 < lr_min <= lr_max");
  }
  if (grad_clip <= 0) throw ConfigError("grad_clip must be positive");
}

json to_json(const nn::NetworkConfig& c) {
  return json{{"sampling_widths", c.sampling_widths},
              {"denoising_widths", c.denoising_widths},
              {"kernel_count", c.kernel_count},
              {"kernel_size", c.kernel_size},
              {"descriptor_dim", c.descriptor_dim},
              {"kernel_head_width", c.kernel_head_width},
              {"ghost_kernel", c.ghost_kernel},
              {"ghost_groups", c.ghost_groups},
              {"pool_hidden", c.pool_hidden},
              {"attention_heads", c.attention_heads}};
}

nn::NetworkConfig network_from_json(const json& j) {
  reject_unknown(j,
                 {"sampling_widths", "denoising_widths", "kernel_count", "kernel_size",
                  "descriptor_dim", "kernel_head_width", "ghost_kernel", "ghost_groups",
                  "pool_hidden", "attention_heads"},
                 "network config");
  nn::NetworkConfig c;
  c.sampling_widths = j.value("sampling_widths", c.sampling_widths);
  c.denoising_widths = j.value("denoising_widths", c.denoising_widths);
  c.kernel_count = j.value("kernel_count", c.kernel_count);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.descriptor_dim = j.value("descriptor_dim", c.descriptor_dim);
  c.kernel_head_width = j.value("kernel_head_width", c.kernel_head_width);
  c.ghost_kernel = j.value("ghost_kernel", c.ghost_kernel);
  c.ghost_groups = j.value("ghost_groups", c.ghost_groups);
  c.pool_hidden = j.value("pool_hidden", c.pool_hidden);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"model", nn::model_kind_name(c.model)},
              {"network", to_json(c.network)},
              {"match_baseline_parameters", c.match_baseline_parameters},
              {"weights", {{"spatial", c.weights.spatial},
                           {"temporal", c.weights.temporal},
                           {"perceptual", c.weights.perceptual}}},
              {"budget", c.budget},
              {"epochs", c.epochs},
              {"lr_max", c.lr_max},
              {"lr_min", c.lr_min},
              {"grad_clip", c.grad_clip},
              {"clip_length", c.clip_length},
              {"crop_size", c.crop_size},
              {"clips_per_sequence", c.clips_per_sequence},
              {"validation_crop", c.validation_crop},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    reject_unknown(j,
                   {"model", "network", "match_baseline_parameters", "weights", "budget", "epochs",
                    "lr_max", "lr_min", "grad_clip", "clip_length", "crop_size",
                    "clips_per_sequence", "validation_crop", "seed"},
                   "training config");
    TrainConfig c;
    if (j.contains("model")) c.model = nn::parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("network")) c.network = network_from_json(j.at("network"));
    c.match_baseline_parameters = j.value("match_baseline_parameters", c.match_baseline_parameters);
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      reject_unknown(w, {"spatial", "temporal", "perceptual"}, "loss weights");
      c.weights.spatial = w.value("spatial", c.weights.spatial);
      c.weights.temporal = w.value("temporal", c.weights.temporal);
      c.weights.perceptual = w.value("perceptual", c.weights.perceptual);
    }
    c.budget = j.value("budget", c.budget);
    c.epochs = j.value("epochs", c.epochs);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.clip_length = j.value("clip_length", c.clip_length);
    c.crop_size = j.value("crop_size", c.crop_size);
    c.clips_per_sequence = j.value("clips_per_sequence", c.clips_per_sequence);
    c.validation_crop = j.value("validation_crop", c.validation_crop);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open training config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("training config " + path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void save_checkpoint(const fs::path& dir, const nn::Denoiser<float>& model,
                     const nn::NetworkConfig& network, const json& extra) {
  fs::create_directories(dir);
  json params = json::array();
  for (const auto& [name, t] : model.parameters()) {
    const std::string file = parameter_file(name);
    save_tns(dir / file, t);
    params.push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
  }
  json manifest = extra;
  manifest["model"] = nn::model_kind_name(model.kind());
  manifest["network"] = to_json(network);
  manifest["config_hash"] = config_hash(manifest.contains("config") ? manifest["config"]
                                                                    : manifest["network"]);
  manifest["parameters"] = params;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

LoadedModel load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing checkpoint manifest " + manifest_path.string());
  LoadedModel loaded;
  try {
    loaded.manifest = json::parse(in);
    loaded.network = network_from_json(loaded.manifest.at("network"));
    const auto kind = nn::parse_model_kind(loaded.manifest.at("model").get<std::string>());
    loaded.model = nn::make_denoiser<float>(kind, loaded.network, 0);
    std::map<std::string, std::string> files;
    for (const json& p : loaded.manifest.at("parameters")) {
      files[p.at("name").get<std::string>()] = p.at("file").get<std::string>();
    }
    for (auto& [name, t] : loaded.model->parameters()) {
      const auto it = files.find(name);
      if (it == files.end()) throw DataError("checkpoint lacks parameter " + name);
      const Tensor<float> stored = load_tns(dir / it->second);
      if (stored.shape() != t.shape()) {
        throw DataError("checkpoint parameter " + name + " has shape " +
                        shape_string(stored.shape()) + ", model expects " +
                        shape_string(t.shape()));
      }
      std::copy(stored.data().begin(), stored.data().end(), t.mutable_data().begin());
    }
  } catch (const json::exception& e) {
    throw DataError("invalid checkpoint manifest: " + std::string(e.what()));
  }
  return loaded;
}

}  // namespace mcdk::train
