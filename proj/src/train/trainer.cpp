// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "mcdk/core/tns.hpp"

namespace mcdk::train {
namespace fs = std::filesystem;

nn::LossTerms<float> clip_loss(const nn::Denoiser<float>& model,
                               const std::vector<nn::FrameInput<float>>& clip, double budget,
                               const nn::LossWeights& weights,
                               const nn::FeatureExtractor<float>& features) {
  nn::DenoiserState<float> state;
  std::vector<Tensor<float>> predicted, reference;
  for (const auto& frame : clip) {
    const auto out = model.forward(frame, state, budget);
    predicted.push_back(nn::compress(out.d));
    reference.push_back(nn::compress(frame.reference));
  }
  nn::LossWeights w = weights;
  if (clip.size() < 2) w.temporal = 0.0;
  return nn::composite_loss(predicted, reference, w, features);
}

std::vector<nn::FrameInput<float>> make_clip(const Sequence& sequence, int start, int length,
                                             const nn::Crop& crop) {
  if (start < 0 || start + length > static_cast<int>(sequence.size())) {
    throw ConfigError("clip frames [" + std::to_string(start) + ", " +
                      std::to_string(start + length) + ") exceed a sequence of " +
                      std::to_string(sequence.size()));
  }
  std::vector<nn::FrameInput<float>> clip;
  for (int f = start; f < start + length; ++f) {
    clip.push_back(nn::prepare_frame<float>(sequence[static_cast<std::size_t>(f)], crop));
  }
  return clip;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.model == nn::ModelKind::uniform && config_.match_baseline_parameters) {
    config_.network.denoising_widths = nn::uniform_baseline_widths(config_.network);
    config_.match_baseline_parameters = false;
  }
  model_ = nn::make_denoiser<float>(config_.model, config_.network, config_.seed);
  params_ = model_->parameters();
  adam_ = std::make_unique<Adam<float>>(params_);
}

void Trainer::dump(const std::vector<nn::FrameInput<float>>& clip) const {
  if (dump_dir.empty()) return;
  fs::create_directories(dump_dir);
  for (std::size_t f = 0; f < clip.size(); ++f) {
    const std::string tag = "frame" + std::to_string(f);
    save_tns(dump_dir / (tag + "_c_1.tns"), clip[f].stack[0]);
    save_tns(dump_dir / (tag + "_ref.tns"), clip[f].reference);
    save_tns(dump_dir / (tag + "_gbuf.tns"), clip[f].gbuffers_rgb);
  }
  for (const auto& [name, t] : params_) {
    std::string file = name;
    std::replace(file.begin(), file.end(), '/', '.');
    save_tns(dump_dir / (file + ".tns"), t);
  }
}

double Trainer::step(const std::vector<nn::FrameInput<float>>& clip, double learning_rate) {
  Graph<float> graph;
  GraphScope<float> scope(graph);
  const auto loss = clip_loss(*model_, clip, config_.budget, config_.weights, features_);
  const double value = loss.total.item();
  if (!std::isfinite(value)) {
    dump(clip);
    throw NumericError("non-finite training loss at optimizer step " +
                       std::to_string(adam_->steps() + 1) +
                       (dump_dir.empty() ? "" : "; tensors written to " + dump_dir.string()));
  }
  graph.backward(loss.total);
  const double norm = clip_gradients(params_, config_.grad_clip);
  if (!std::isfinite(norm)) {
    dump(clip);
    throw NumericError("non-finite gradient norm at optimizer step " +
                       std::to_string(adam_->steps() + 1));
  }
  adam_->step(params_, learning_rate);
  return value;
}

void Trainer::check_gradient_flow(const std::vector<nn::FrameInput<float>>& clip) {
  Graph<float> graph;
  GraphScope<float> scope(graph);
  const auto loss = clip_loss(*model_, clip, config_.budget, config_.weights, features_);
  graph.backward(loss.total);
  std::string dead;
  for (auto& [name, t] : params_) {
    const auto g = t.grad();
    const bool alive = std::any_of(g.begin(), g.end(), [](float v) { return v != 0.0f; });
    if (!alive && dead.empty()) dead = name;
    t.zero_grad();
  }
  if (!dead.empty()) throw NumericError("parameter " + dead + " receives no gradient");
}

double Trainer::validation_loss(const std::vector<Sequence>& sequences) const {
  NoGradScope<float> no_grad;
  double total = 0;
  int count = 0;
  for (const auto& seq : sequences) {
    const Index h = seq.front().height(), w = seq.front().width();
    const Index ch = std::min(config_.validation_crop, h), cw = std::min(config_.validation_crop, w);
    const nn::Crop crop{(h - ch) / 2, (w - cw) / 2, ch, cw};
    const int length = std::min<int>(config_.clip_length, static_cast<int>(seq.size()));
    const auto clip = make_clip(seq, 0, length, crop);
    total += clip_loss(*model_, clip, config_.budget, config_.weights, features_).total.item();
    ++count;
  }
  return count ? total / count : 0.0;
}

TrainResult Trainer::fit(const std::vector<Sequence>& train,
                         const std::vector<Sequence>& validation, const fs::path& out_dir,
                         std::ostream* log) {
  if (train.empty()) throw ConfigError("training needs at least one sequence");
  for (const auto& seq : train) {
    if (seq.empty()) throw ConfigError("training sequence without frames");
  }
  const auto& val = validation.empty() ? train : validation;
  std::ofstream csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    if (dump_dir.empty()) dump_dir = out_dir / "nan_dump";
    csv.open(out_dir / "loss.csv");
    csv << "epoch,learning_rate,train_loss,val_loss,seconds\n";
  }
  const nlohmann::json config_json = to_json(config_);

  Rng rng(config_.seed ^ 0x5eedULL);
  TrainResult result;
  std::vector<Tensor<float>> best;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = cosine_learning_rate(epoch, config_.epochs, config_.lr_max, config_.lr_min);
    struct ClipSpec {
      std::size_t sequence;
      int start, length;
      nn::Crop crop;
    };
    std::vector<ClipSpec> specs;
    for (std::size_t s = 0; s < train.size(); ++s) {
      const auto& seq = train[s];
      const int length = std::min<int>(config_.clip_length, static_cast<int>(seq.size()));
      const Index h = seq.front().height(), w = seq.front().width();
      const Index ch = std::min(config_.crop_size, h), cw = std::min(config_.crop_size, w);
      for (int k = 0; k < config_.clips_per_sequence; ++k) {
        ClipSpec spec{s, static_cast<int>(rng.uniform_int(0, static_cast<int>(seq.size()) - length)),
                      length, nn::Crop{rng.uniform_int(0, h - ch), rng.uniform_int(0, w - cw), ch, cw}};
        specs.push_back(spec);
      }
    }
    std::shuffle(specs.begin(), specs.end(), rng.engine());

    double train_loss = 0;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto& spec = specs[k];
      const auto clip = make_clip(train[spec.sequence], spec.start, spec.length, spec.crop);
      if (epoch == 0 && k == 0) check_gradient_flow(clip);
      train_loss += step(clip, lr);
    }
    train_loss /= static_cast<double>(specs.size());
    const double val_loss = validation_loss(val);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(EpochRecord{epoch, lr, train_loss, val_loss, seconds});

    const bool improved = result.best_epoch < 0 || val_loss < result.best_val_loss;
    if (improved) {
      result.best_epoch = epoch;
      result.best_val_loss = val_loss;
      best.clear();
      for (const auto& [name, t] : params_) best.push_back(t.clone());
    }
    if (!out_dir.empty()) {
      const nlohmann::json extra = {{"config", config_json},
                                    {"epoch", epoch},
                                    {"val_loss", val_loss},
                                    {"budget", config_.budget}};
      save_checkpoint(out_dir / "last", *model_, config_.network, extra);
      if (improved) save_checkpoint(out_dir / "best", *model_, config_.network, extra);
      csv << epoch << ',' << lr << ',' << train_loss << ',' << val_loss << ',' << seconds << '\n'
          << std::flush;
    }
    if (log) {
      *log << "epoch " << epoch + 1 << "/" << config_.epochs << " lr " << lr << " train "
           << train_loss << " val " << val_loss << " (" << seconds << " s)\n"
           << std::flush;
    }
  }
  // Leave the model at its best validation epoch.
  for (std::size_t k = 0; k < best.size(); ++k) {
    std::copy(best[k].data().begin(), best[k].data().end(),
              params_[k].second.mutable_data().begin());
  }
  return result;
}

}  // namespace mcdk::train
