// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/nn/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "mcdk/render/renderer.hpp"

namespace mcdk::nn {
namespace {

// Copies channels [c0, c0 + count) of a [C,H,W] image inside `crop` into
// out[0, dst + k] and applies fn.
template <typename S, typename Fn>
void copy_channels(const Tensor<float>& src, Index c0, Index count, const Crop& crop,
                   Tensor<S>& out, Index dst, Fn fn) {
  const Index sh = src.dim(1), sw = src.dim(2);
  const Index h = out.dim(2), w = out.dim(3);
  for (Index c = 0; c < count; ++c) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const float v = src[((c0 + c) * sh + crop.y + y) * sw + crop.x + x];
        out[((dst + c) * h + y) * w + x] = static_cast<S>(fn(v));
      }
    }
  }
}

float clamp_radiance(float v) {
  return std::isfinite(v) ? std::clamp(v, 0.0f, static_cast<float>(kRadianceClamp))
                          : static_cast<float>(kRadianceClamp);
}

float identity(float v) { return v; }

template <typename S>
Tensor<S> luminance_of(const Tensor<S>& image) {
  const Index h = image.dim(2), w = image.dim(3), plane = h * w;
  Tensor<S> gray(Shape{1, 1, h, w});
  for (Index p = 0; p < plane; ++p) {
    gray[p] = static_cast<S>(render::luminance(
        render::Vec3(image[p], image[plane + p], image[2 * plane + p])));
  }
  return gray;
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::two_stage ? "two_stage" : "uniform";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "two_stage") return ModelKind::two_stage;
  if (name == "uniform") return ModelKind::uniform;
  throw ConfigError("unknown model kind '" + name + "' (expected two_stage or uniform)");
}

template <typename S>
FrameInput<S> prepare_frame(const render::FrameBundle& bundle, const Crop& crop_in) {
  Crop crop = crop_in;
  const Index fh = bundle.height(), fw = bundle.width();
  if (crop.height == 0 || crop.width == 0) crop = Crop{0, 0, fh, fw};
  if (crop.y < 0 || crop.x < 0 || crop.y + crop.height > fh || crop.x + crop.width > fw) {
    throw DimensionError("crop exceeds the " + std::to_string(fh) + "x" + std::to_string(fw) +
                         " frame");
  }
  const Index h = crop.height, w = crop.width;
  FrameInput<S> in;
  for (int level = 0; level < sampling::kStackLevels; ++level) {
    Tensor<S> t(Shape{1, 3, h, w});
    copy_channels(bundle.spp_stack[static_cast<std::size_t>(level)], 0, 3, crop, t, 0,
                  clamp_radiance);
    in.stack[static_cast<std::size_t>(level)] = t;
  }
  in.reference = Tensor<S>(Shape{1, 3, h, w});
  copy_channels(bundle.reference, 0, 3, crop, in.reference, 0, clamp_radiance);
  in.gbuffers = Tensor<S>(Shape{1, 5, h, w});
  copy_channels(bundle.gbuffers, 0, 5, crop, in.gbuffers, 0, identity);
  in.gbuffers_rgb = Tensor<S>(Shape{1, 7, h, w});
  copy_channels(bundle.gbuffers, 0, 4, crop, in.gbuffers_rgb, 0, identity);
  copy_channels(bundle.albedo_rgb, 0, 3, crop, in.gbuffers_rgb, 4, identity);
  return in;
}

template <typename S>
Tensor<S> compress(const Tensor<S>& x) {
  return ops::div(x, ops::add_scalar(x, S(1)));
}

template <typename S>
TwoStageDenoiser<S>::TwoStageDenoiser(const NetworkConfig& cfg, std::uint64_t seed)
    : config(cfg) {
  Rng rng(seed);
  sampling = SamplingNet<S>(config, rng);
  denoising = DenoisingNet<S>(config.denoising_widths, config.pool_hidden,
                              config.attention_heads, rng);
  if (sampling.parameter_count() >= denoising.parameter_count()) {
    throw ConfigError("sampling network (" + std::to_string(sampling.parameter_count()) +
                      " parameters) must be smaller than the denoising network (" +
                      std::to_string(denoising.parameter_count()) + ")");
  }
}

template <typename S>
FrameOutput<S> TwoStageDenoiser<S>::forward(const FrameInput<S>& frame, DenoiserState<S>& state,
                                            double budget) const {
  if (budget < 1.0) throw ConfigError("budget must be >= 1 spp");
  const Tensor<S>& c1 = frame.stack[0];
  const Tensor<S> gray = compress(luminance_of(c1));
  const auto features = sampling(ops::concat<S>({gray, frame.gbuffers}, 1));

  FrameOutput<S> out;
  out.map = sampling::normalize_budget(features.m_bar, sampling::effective_budget(budget));
  const Tensor<S> adaptive =
      sampling::simulate_adaptive(out.map, frame.stack, frame.reference, surrogate_gradient);
  out.i = sampling::blend_c1(adaptive, c1, out.map.m);

  const auto adjusted = sampling.adjuster(features.coarse, sampling.pool);
  out.kernel_map =
      sampling.map_head(features.fine, compress(out.i), frame.gbuffers, adjusted.descriptor);
  out.ibar = kernel::interpolate_and_apply(out.i, adjusted.pi_bar, out.kernel_map);

  const Tensor<S> denoiser_input = ops::concat<S>({compress(out.ibar), frame.gbuffers_rgb}, 1);
  auto result = denoising(out.ibar, denoiser_input, state.features);
  out.d = result.image;
  state.features = result.state;
  return out;
}

template <typename S>
ParamList<S> TwoStageDenoiser<S>::parameters() const {
  ParamList<S> params;
  sampling.collect(params, "sampling");
  denoising.collect(params, "denoising");
  return params;
}

template <typename S>
UniformDenoiser<S>::UniformDenoiser(const NetworkConfig& cfg, std::uint64_t seed) : config(cfg) {
  config.validate();
  Rng rng(seed);
  denoising = DenoisingNet<S>(config.denoising_widths, config.pool_hidden,
                              config.attention_heads, rng);
}

template <typename S>
FrameOutput<S> UniformDenoiser<S>::forward(const FrameInput<S>& frame, DenoiserState<S>& state,
                                           double budget) const {
  const double level = std::log2(budget);
  if (budget < 1.0 || level != std::floor(level) || level >= sampling::kStackLevels) {
    throw ConfigError("uniform baseline needs a power-of-two budget up to 32, got " +
                      std::to_string(budget));
  }
  FrameOutput<S> out;
  out.i = frame.stack[static_cast<std::size_t>(level)];
  out.ibar = out.i;
  const Index h = frame.height(), w = frame.width();
  out.map.height = h;
  out.map.width = w;
  out.map.budget = budget;
  out.map.m.assign(static_cast<std::size_t>(h * w), static_cast<int>(budget));
  const Tensor<S> denoiser_input = ops::concat<S>({compress(out.i), frame.gbuffers_rgb}, 1);
  auto result = denoising(out.i, denoiser_input, state.features);
  out.d = result.image;
  state.features = result.state;
  return out;
}

template <typename S>
ParamList<S> UniformDenoiser<S>::parameters() const {
  ParamList<S> params;
  denoising.collect(params, "denoising");
  return params;
}

std::vector<Index> uniform_baseline_widths(const NetworkConfig& config) {
  const TwoStageDenoiser<float> reference(config, 0);
  return matched_denoising_widths(config.denoising_widths, reference.parameter_count(),
                                  config.pool_hidden, config.attention_heads);
}

template <typename S>
std::unique_ptr<Denoiser<S>> make_denoiser(ModelKind kind, const NetworkConfig& config,
                                           std::uint64_t seed) {
  if (kind == ModelKind::two_stage) return std::make_unique<TwoStageDenoiser<S>>(config, seed);
  return std::make_unique<UniformDenoiser<S>>(config, seed);
}

#define MCDK_INSTANTIATE_PIPELINE(S)                                                          \
  template FrameInput<S> prepare_frame(const render::FrameBundle&, const Crop&);              \
  template Tensor<S> compress(const Tensor<S>&);                                              \
  template class TwoStageDenoiser<S>;                                                         \
  template class UniformDenoiser<S>;                                                          \
  template std::unique_ptr<Denoiser<S>> make_denoiser(ModelKind, const NetworkConfig&,        \
                                                      std::uint64_t);

MCDK_INSTANTIATE_PIPELINE(float)
MCDK_INSTANTIATE_PIPELINE(double)

#undef MCDK_INSTANTIATE_PIPELINE

}  // namespace mcdk::nn
