// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "mcdk/nn/networks.hpp"
#include "mcdk/render/dataset.hpp"
#include "mcdk/sampling/sampling.hpp"

namespace mcdk::nn {

/// Upper bound applied to radiance before it enters the networks.
inline constexpr double kRadianceClamp = 64.0;

struct Crop {
  Index y = 0;
  Index x = 0;
  Index height = 0;  // 0 selects the full frame
  Index width = 0;
};

/// Network-ready tensors of one frame, all [1,C,H,W].
template <typename S>
struct FrameInput {
  sampling::SppStack<S> stack;
  Tensor<S> reference;
  Tensor<S> gbuffers;      // depth, normal, gray albedo
  Tensor<S> gbuffers_rgb;  // depth, normal, RGB albedo

  Index height() const { return reference.dim(2); }
  Index width() const { return reference.dim(3); }
};

/// Converts a bundle (optionally cropped), clamping radiance to [0, 64].
template <typename S>
FrameInput<S> prepare_frame(const render::FrameBundle& bundle, const Crop& crop = {});

/// x / (1 + x), the range compression used for network inputs and losses.
template <typename S>
Tensor<S> compress(const Tensor<S>& x);

template <typename S>
struct DenoiserState {
  Tensor<S> features;  // undefined before the first frame

  /// Cuts gradient flow into earlier frames.
  void detach() {
    if (features.defined()) features = features.detach();
  }
};

template <typename S>
struct FrameOutput {
  Tensor<S> d;           // [1,3,H,W] denoised
  Tensor<S> i;           // [1,3,H,W] adaptive image blended with c_1
  Tensor<S> ibar;        // [1,3,H,W] first-stage result
  Tensor<S> kernel_map;  // [1,2,H,W], undefined for the uniform baseline
  sampling::SamplingMap<S> map;
};

enum class ModelKind { two_stage, uniform };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

template <typename S>
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual ModelKind kind() const = 0;
  /// Runs one frame and advances the recurrent state.
  virtual FrameOutput<S> forward(const FrameInput<S>& frame, DenoiserState<S>& state,
                                 double budget) const = 0;
  virtual ParamList<S> parameters() const = 0;
  Index parameter_count() const { return nn::parameter_count(parameters()); }
};

/// Sampling network + kernel-pool first stage + recurrent denoising network.
template <typename S>
class TwoStageDenoiser final : public Denoiser<S> {
 public:
  TwoStageDenoiser(const NetworkConfig& config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::two_stage; }
  FrameOutput<S> forward(const FrameInput<S>& frame, DenoiserState<S>& state,
                         double budget) const override;
  ParamList<S> parameters() const override;

  /// When false, sampling logits receive no gradient through the rounded
  /// sample counts (useful for finite-difference checks).
  bool surrogate_gradient = true;

  NetworkConfig config;
  SamplingNet<S> sampling;
  DenoisingNet<S> denoising;
};

/// A denoising network fed the uniform render at the budget's spp.
template <typename S>
class UniformDenoiser final : public Denoiser<S> {
 public:
  UniformDenoiser(const NetworkConfig& config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::uniform; }
  FrameOutput<S> forward(const FrameInput<S>& frame, DenoiserState<S>& state,
                         double budget) const override;
  ParamList<S> parameters() const override;

  NetworkConfig config;
  DenoisingNet<S> denoising;
};

/// Denoising-network widths of the uniform baseline, matched to the
/// two-stage model's total parameter count.
std::vector<Index> uniform_baseline_widths(const NetworkConfig& config);

template <typename S>
std::unique_ptr<Denoiser<S>> make_denoiser(ModelKind kind, const NetworkConfig& config,
                                           std::uint64_t seed);

}  // namespace mcdk::nn
