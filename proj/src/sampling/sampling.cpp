// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/sampling/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcdk/core/ops.hpp"

namespace mcdk::sampling {
namespace {

template <typename S>
Index pixel_count_of(const Tensor<S>& image, std::size_t m_size, const char* op) {
  const auto pixels = static_cast<Index>(m_size);
  if (image.rank() < 3 || image.dim(-3) != 3 || image.dim(-2) * image.dim(-1) != pixels ||
      image.size() != 3 * pixels) {
    throw DimensionError(std::string(op) + ": image " + shape_string(image.shape()) +
                         " does not hold 3 channels over " + std::to_string(pixels) +
                         " pixels");
  }
  return pixels;
}

// Shape of `image` with the channel axis collapsed to 1.
template <typename S>
Shape pixel_shape(const Tensor<S>& image) {
  Shape s = image.shape();
  s[s.size() - 3] = 1;
  return s;
}

}  // namespace

template <typename S>
long long SamplingMap<S>::total() const {
  return std::accumulate(m.begin(), m.end(), 0LL);
}

template <typename S>
Tensor<S> SamplingMap<S>::counts() const {
  Tensor<S> t(Shape{1, 1, height, width});
  for (Index p = 0; p < pixels(); ++p) t[p] = static_cast<S>(m[static_cast<std::size_t>(p)]);
  return t;
}

template <typename S>
SamplingMap<S> normalize_budget(const Tensor<S>& m_bar, double budget) {
  if (m_bar.rank() != 4 || m_bar.dim(0) != 1 || m_bar.dim(1) != 1) {
    throw DimensionError("normalize_budget: logits must be [1,1,H,W], got " +
                         shape_string(m_bar.shape()));
  }
  if (budget < 0 || budget > kMaxSpp) {
    throw ConfigError("normalize_budget: budget " + std::to_string(budget) +
                      " outside [0, " + std::to_string(kMaxSpp) + "]");
  }
  SamplingMap<S> map;
  map.height = m_bar.dim(2);
  map.width = m_bar.dim(3);
  map.budget = budget;
  map.m_bar = m_bar;
  const Index n = map.pixels();
  map.probs = ops::reshape(ops::softmax(ops::reshape(m_bar, {1, n}), 1), m_bar.shape());

  // Continuous allocation, water-filled under the cap. Shares are recomputed
  // from the uncapped pixels each round; if their probabilities underflow,
  // the remainder is spread evenly.
  const auto count = static_cast<std::size_t>(n);
  std::vector<double> probs(count);
  for (std::size_t u = 0; u < count; ++u) {
    probs[u] = static_cast<double>(map.probs[static_cast<Index>(u)]);
  }
  std::vector<double> target(count, 0.0);
  std::vector<bool> capped(count, false);
  std::size_t capped_count = 0;
  while (capped_count < count) {
    const double remaining =
        budget * static_cast<double>(n) - kMaxSpp * static_cast<double>(capped_count);
    double free_mass = 0;
    for (std::size_t u = 0; u < count; ++u) {
      if (!capped[u]) free_mass += probs[u];
    }
    const double free_count = static_cast<double>(count - capped_count);
    bool newly_capped = false;
    for (std::size_t u = 0; u < count; ++u) {
      if (capped[u]) continue;
      target[u] = remaining * (free_mass > 0 ? probs[u] / free_mass : 1.0 / free_count);
      newly_capped = newly_capped || target[u] > kMaxSpp;
    }
    if (!newly_capped) break;
    for (std::size_t u = 0; u < count; ++u) {
      if (!capped[u] && target[u] > kMaxSpp) {
        capped[u] = true;
        target[u] = kMaxSpp;
        ++capped_count;
      }
    }
  }

  // Largest-remainder rounding: floor everything, then hand the leftover
  // samples to the largest fractional parts so the total matches the budget.
  map.m.resize(count);
  long assigned = 0;
  for (std::size_t u = 0; u < count; ++u) {
    map.m[u] = static_cast<int>(std::clamp(std::floor(target[u]), 0.0, double{kMaxSpp}));
    assigned += map.m[u];
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return target[a] - map.m[a] > target[b] - map.m[b];
  });
  long leftover = std::lround(budget * static_cast<double>(n)) - assigned;
  for (std::size_t k = 0; k < count && leftover > 0; ++k) {
    const std::size_t u = order[k];
    if (map.m[u] < kMaxSpp) {
      ++map.m[u];
      --leftover;
    }
  }
  return map;
}

template <typename S>
Tensor<S> assemble_adaptive(const SppStack<S>& stack, std::span<const int> m) {
  for (int level = 0; level < kStackLevels; ++level) {
    if (!stack[static_cast<std::size_t>(level)].defined()) {
      throw DataError("assemble_adaptive: missing stack level c_" + std::to_string(1 << level));
    }
    if (stack[static_cast<std::size_t>(level)].shape() != stack[0].shape()) {
      throw DimensionError("assemble_adaptive: stack levels disagree in shape");
    }
  }
  const Index pixels = pixel_count_of(stack[0], m.size(), "assemble_adaptive");
  const Index planes = stack[0].size() / pixels;
  Tensor<S> out(stack[0].shape());
  for (Index p = 0; p < pixels; ++p) {
    const int count = m[static_cast<std::size_t>(p)];
    if (count < 0 || count > kMaxSpp) {
      throw DataError("assemble_adaptive: spp " + std::to_string(count) + " at pixel " +
                      std::to_string(p) + " outside [0, 63]");
    }
    for (Index c = 0; c < planes; ++c) {
      const Index idx = c * pixels + p;
      if (count == 0) {
        out[idx] = stack[0][idx];
        continue;
      }
      S acc = 0;
      for (int level = 0; level < kStackLevels; ++level) {
        if (count & (1 << level)) {
          acc += stack[static_cast<std::size_t>(level)][idx] * static_cast<S>(1 << level);
        }
      }
      out[idx] = acc / static_cast<S>(count);
    }
  }
  return out;
}

template <typename S>
Tensor<S> sampling_gradient(const Tensor<S>& image, const Tensor<S>& reference,
                            std::span<const int> m) {
  const Index pixels = pixel_count_of(image, m.size(), "sampling_gradient");
  if (reference.shape() != image.shape()) {
    throw DimensionError("sampling_gradient: reference shape " + shape_string(reference.shape()) +
                         " differs from image " + shape_string(image.shape()));
  }
  const Index h = image.dim(-2), w = image.dim(-1);
  Tensor<S> grad(Shape{1, 1, h, w});
  for (Index p = 0; p < pixels; ++p) {
    const int count = m[static_cast<std::size_t>(p)];
    if (count <= 0) continue;
    S acc = 0;
    for (Index c = 0; c < 3; ++c) acc += reference[c * pixels + p] - image[c * pixels + p];
    grad[p] = acc / (S(3) * static_cast<S>(count));
  }
  return grad;
}

template <typename S>
Tensor<S> blend_c1(const Tensor<S>& image, const Tensor<S>& c1, std::span<const int> m) {
  const Index pixels = pixel_count_of(image, m.size(), "blend_c1");
  if (c1.shape() != image.shape()) {
    throw DimensionError("blend_c1: c1 shape " + shape_string(c1.shape()) +
                         " differs from image " + shape_string(image.shape()));
  }
  Tensor<S> counts(pixel_shape(image));
  Tensor<S> denom(pixel_shape(image));
  for (Index p = 0; p < pixels; ++p) {
    counts[p] = static_cast<S>(m[static_cast<std::size_t>(p)]);
    denom[p] = S(1) + counts[p];
  }
  return ops::div(ops::add(c1, ops::mul(counts, image)), denom);
}

template <typename S>
Tensor<S> simulate_adaptive(const SamplingMap<S>& map, const SppStack<S>& stack,
                            const Tensor<S>& reference, bool surrogate) {
  Tensor<S> image = assemble_adaptive(stack, map.m);
  Graph<S>* graph = Graph<S>::active();
  if (!surrogate || graph == nullptr || !map.probs.requires_grad()) return image;

  const Index pixels = map.pixels();
  if (reference.shape() != image.shape()) {
    throw DimensionError("simulate_adaptive: reference shape " + shape_string(reference.shape()) +
                         " differs from image " + shape_string(image.shape()));
  }
  // Per-channel surrogate derivative d(image)/d(m).
  std::vector<S> slope(static_cast<std::size_t>(3 * pixels), S(0));
  for (Index p = 0; p < pixels; ++p) {
    const int count = map.m[static_cast<std::size_t>(p)];
    if (count <= 0) continue;
    for (Index c = 0; c < 3; ++c) {
      const Index idx = c * pixels + p;
      slope[static_cast<std::size_t>(idx)] = (reference[idx] - image[idx]) / static_cast<S>(count);
    }
  }
  image.set_requires_grad(true);
  graph->record("simulate_adaptive", {map.probs}, image,
                [slope = std::move(slope), pixels](typename Graph<S>::Node& node) {
                  const S* g = node.output.grad().data();
                  S* gp = node.inputs[0].grad_buffer().data();
                  for (Index p = 0; p < pixels; ++p) {
                    S acc = 0;
                    for (Index c = 0; c < 3; ++c) {
                      const Index idx = c * pixels + p;
                      acc += g[idx] * slope[static_cast<std::size_t>(idx)];
                    }
                    gp[p] += acc / S(3);
                  }
                });
  return image;
}

#define MCDK_INSTANTIATE_SAMPLING(S)                                                       \
  template struct SamplingMap<S>;                                                          \
  template SamplingMap<S> normalize_budget(const Tensor<S>&, double);                      \
  template Tensor<S> assemble_adaptive(const SppStack<S>&, std::span<const int>);          \
  template Tensor<S> sampling_gradient(const Tensor<S>&, const Tensor<S>&,                 \
                                       std::span<const int>);                              \
  template Tensor<S> blend_c1(const Tensor<S>&, const Tensor<S>&, std::span<const int>);   \
  template Tensor<S> simulate_adaptive(const SamplingMap<S>&, const SppStack<S>&,          \
                                       const Tensor<S>&, bool);

MCDK_INSTANTIATE_SAMPLING(float)
MCDK_INSTANTIATE_SAMPLING(double)

#undef MCDK_INSTANTIATE_SAMPLING

}  // namespace mcdk::sampling
