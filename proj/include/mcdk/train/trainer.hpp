// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

#include "mcdk/render/dataset.hpp"
#include "mcdk/train/config.hpp"
#include "mcdk/train/optim.hpp"

namespace mcdk::train {

using Sequence = std::vector<render::FrameBundle>;

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0;
  double train_loss = 0;
  double val_loss = 0;
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_loss = 0;
};

/// Runs a model over a clip recurrently (state starts empty) and returns
/// the composite loss on range-compressed frames. Records onto the active
/// graph if there is one.
nn::LossTerms<float> clip_loss(const nn::Denoiser<float>& model,
                               const std::vector<nn::FrameInput<float>>& clip, double budget,
                               const nn::LossWeights& weights,
                               const nn::FeatureExtractor<float>& features);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  nn::Denoiser<float>& model() { return *model_; }
  const nn::Denoiser<float>& model() const { return *model_; }

  /// One Adam step on a clip; returns the loss before the update.
  /// Throws NumericError on a non-finite loss.
  double step(const std::vector<nn::FrameInput<float>>& clip, double learning_rate);

  /// Mean loss over center-cropped clips from the start of every sequence.
  double validation_loss(const std::vector<Sequence>& sequences) const;

  /// Full schedule. With a non-empty out_dir, writes `last/` and `best/`
  /// checkpoints every epoch and `loss.csv`.
  TrainResult fit(const std::vector<Sequence>& train, const std::vector<Sequence>& validation,
                  const std::filesystem::path& out_dir, std::ostream* log = nullptr);

  /// Throws NumericError naming the first parameter whose gradient from one
  /// step on `clip` is identically zero.
  void check_gradient_flow(const std::vector<nn::FrameInput<float>>& clip);

  /// Where step() dumps tensors when the loss is not finite.
  std::filesystem::path dump_dir;

 private:
  void dump(const std::vector<nn::FrameInput<float>>& clip) const;

  TrainConfig config_;
  std::unique_ptr<nn::Denoiser<float>> model_;
  nn::ParamList<float> params_;
  std::unique_ptr<Adam<float>> adam_;
  nn::RandomConvFeatures<float> features_;
};

/// Frames [start, start + length) of a sequence prepared with one crop.
std::vector<nn::FrameInput<float>> make_clip(const Sequence& sequence, int start, int length,
                                             const nn::Crop& crop);

}  // namespace mcdk::train
