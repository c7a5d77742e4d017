// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/nn/operators.hpp"

#include <cmath>

namespace mcdk::nn {

template <typename S>
FastGhostConv<S>::FastGhostConv(Index in_channels, Index out_channels, Rng& rng, Index kernel,
                                Index groups) {
  if (in_channels % groups != 0) {
    throw ConfigError("FastGhostConv: " + std::to_string(in_channels) +
                      " input channels not divisible by " + std::to_string(groups) + " groups");
  }
  if (out_channels % 2 != 0) {
    throw ConfigError("FastGhostConv: output channels must be even");
  }
  const Index half = out_channels / 2;
  group = Conv2d<S>(in_channels, in_channels, kernel, rng, groups);
  point = Conv2d<S>(in_channels, half, 1, rng);
  ghost = Conv2d<S>(half, half, 3, rng, half);
  if (parameter_count() >= dense_parameter_count(in_channels, out_channels, kernel)) {
    throw ConfigError("FastGhostConv: parameter count " + std::to_string(parameter_count()) +
                      " is not below the dense equivalent " +
                      std::to_string(dense_parameter_count(in_channels, out_channels, kernel)));
  }
}

template <typename S>
Tensor<S> FastGhostConv<S>::operator()(const Tensor<S>& x) const {
  const Tensor<S> p = point(ops::relu(group(x)));
  return ops::concat<S>({p, ghost(p)}, 1);
}

template <typename S>
void FastGhostConv<S>::collect(ParamList<S>& out, const std::string& prefix) const {
  group.collect(out, prefix + "/group");
  point.collect(out, prefix + "/point");
  ghost.collect(out, prefix + "/ghost");
}

template <typename S>
Index FastGhostConv<S>::parameter_count() const {
  return group.parameter_count() + point.parameter_count() + ghost.parameter_count();
}

template <typename S>
Index FastGhostConv<S>::dense_parameter_count(Index in_channels, Index out_channels,
                                              Index kernel) {
  return in_channels * out_channels * kernel * kernel + out_channels;
}

template <typename S>
void FastGhostConv<S>::zero() {
  group.zero();
  point.zero();
  ghost.zero();
}

template <typename S>
PositionAwarePool<S>::PositionAwarePool(Index channels, Rng& rng, Index hidden)
    : score_hidden(channels + 6, hidden, 1, rng), score_out(Conv2d<S>(hidden, 1, 1, rng).without_bias()) {}

namespace {

// Absolute position (2 channels, in (-1,1)) and one-hot window slot
// (4 channels) of window member `slot` for a padded map of size h x w.
template <typename S>
Tensor<S> member_position(Index batch, Index h, Index w, int slot) {
  const Index oh = h / 2, ow = w / 2, plane = oh * ow;
  const Index dy = slot / 2, dx = slot % 2;
  Tensor<S> t(Shape{batch, 6, oh, ow});
  for (Index b = 0; b < batch; ++b) {
    S* base = t.mutable_ptr() + b * 6 * plane;
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        const Index fy = 2 * y + dy, fx = 2 * x + dx;
        base[y * ow + x] = static_cast<S>(-1.0 + (2.0 * static_cast<double>(fy) + 1.0) / static_cast<double>(h));
        base[plane + y * ow + x] = static_cast<S>(-1.0 + (2.0 * static_cast<double>(fx) + 1.0) / static_cast<double>(w));
        base[(2 + slot) * plane + y * ow + x] = S(1);
      }
    }
  }
  return t;
}

}  // namespace

template <typename S>
Tensor<S> PositionAwarePool<S>::window_scores(const Tensor<S>& x) const {
  const Tensor<S> padded = ops::pad_replicate_even(x);
  const Index batch = padded.dim(0), h = padded.dim(2), w = padded.dim(3);
  std::vector<Tensor<S>> logits;
  for (int slot = 0; slot < 4; ++slot) {
    const Tensor<S> member = ops::window_member(padded, slot / 2, slot % 2);
    const Tensor<S> features =
        ops::concat<S>({member, member_position<S>(batch, h, w, slot)}, 1);
    logits.push_back(score_out(ops::relu(score_hidden(features))));
  }
  return ops::softmax(ops::concat(logits, 1), 1);
}

template <typename S>
Tensor<S> PositionAwarePool<S>::operator()(const Tensor<S>& x) const {
  const Tensor<S> padded = ops::pad_replicate_even(x);
  const Tensor<S> scores = window_scores(padded);
  Tensor<S> out;
  for (int slot = 0; slot < 4; ++slot) {
    const Tensor<S> weighted =
        ops::mul(ops::narrow(scores, 1, slot, 1), ops::window_member(padded, slot / 2, slot % 2));
    out = out.defined() ? ops::add(out, weighted) : weighted;
  }
  return out;
}

template <typename S>
void PositionAwarePool<S>::collect(ParamList<S>& out, const std::string& prefix) const {
  score_hidden.collect(out, prefix + "/score_hidden");
  score_out.collect(out, prefix + "/score_out");
}

template <typename S>
Index PositionAwarePool<S>::parameter_count() const {
  return score_hidden.parameter_count() + score_out.parameter_count();
}

template <typename S>
Tensor<S> sine_cosine_encoding(Index channels, Index height, Index width) {
  if (channels % 4 != 0) {
    throw ConfigError("positional encoding needs a channel count divisible by 4, got " +
                      std::to_string(channels));
  }
  const Index half = channels / 2, plane = height * width;
  Tensor<S> t(Shape{1, channels, height, width});
  for (Index i = 0; i < half / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(channels));
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        const double py = static_cast<double>(y) * freq, px = static_cast<double>(x) * freq;
        t[(2 * i) * plane + y * width + x] = static_cast<S>(std::sin(py));
        t[(2 * i + 1) * plane + y * width + x] = static_cast<S>(std::cos(py));
        t[(half + 2 * i) * plane + y * width + x] = static_cast<S>(std::sin(px));
        t[(half + 2 * i + 1) * plane + y * width + x] = static_cast<S>(std::cos(px));
      }
    }
  }
  return t;
}

template <typename S>
SemanticAlign<S>::SemanticAlign(Index channels, Rng& rng, Index head_count)
    : query(channels, channels, 1, rng),
      key(Conv2d<S>(channels, channels, 1, rng).without_bias()),
      value(channels, channels, 1, rng),
      output(Conv2d<S>(channels, channels, 1, rng).scaled(S(0.1))),
      ff1(channels, channels, 3, rng),
      ff2(Conv2d<S>(channels, channels, 3, rng).scaled(S(0.1))),
      heads(head_count) {
  if (channels % heads != 0 || channels % 4 != 0) {
    throw ConfigError("SemanticAlign: " + std::to_string(channels) +
                      " channels incompatible with " + std::to_string(heads) + " heads");
  }
}

template <typename S>
typename SemanticAlign<S>::Result SemanticAlign<S>::operator()(const Tensor<S>& current,
                                                               const Tensor<S>& previous) const {
  const Tensor<S> prev = previous.defined() ? previous : current;
  if (prev.shape() != current.shape()) {
    throw DimensionError("semantic_align: previous features " + shape_string(prev.shape()) +
                         " do not match current " + shape_string(current.shape()));
  }
  const Index batch = current.dim(0), channels = current.dim(1), h = current.dim(2),
              w = current.dim(3);
  const Index tokens = h * w, depth = channels / heads;

  const Tensor<S> q = query(ops::add(current, sine_cosine_encoding<S>(channels, h, w)));
  const Tensor<S> k = key(prev);
  const Tensor<S> v = value(prev);

  const Tensor<S> qh = ops::permute(ops::reshape(q, {batch, heads, depth, tokens}), {0, 1, 3, 2});
  const Tensor<S> kh = ops::reshape(k, {batch, heads, depth, tokens});
  const Tensor<S> vh = ops::permute(ops::reshape(v, {batch, heads, depth, tokens}), {0, 1, 3, 2});
  const Tensor<S> scores =
      ops::scale(ops::matmul(qh, kh), static_cast<S>(1.0 / std::sqrt(static_cast<double>(depth))));
  const Tensor<S> attention = ops::softmax(scores, 3);
  const Tensor<S> mixed = ops::reshape(ops::permute(ops::matmul(attention, vh), {0, 1, 3, 2}),
                                       {batch, channels, h, w});
  const Tensor<S> aligned = ops::add(current, output(mixed));
  const Tensor<S> out = ops::add(aligned, ff2(ops::relu(ff1(aligned))));
  return Result{out, out, attention};
}

template <typename S>
void SemanticAlign<S>::collect(ParamList<S>& out, const std::string& prefix) const {
  query.collect(out, prefix + "/query");
  key.collect(out, prefix + "/key");
  value.collect(out, prefix + "/value");
  output.collect(out, prefix + "/output");
  ff1.collect(out, prefix + "/ff1");
  ff2.collect(out, prefix + "/ff2");
}

template <typename S>
Index SemanticAlign<S>::parameter_count() const {
  return query.parameter_count() + key.parameter_count() + value.parameter_count() +
         output.parameter_count() + ff1.parameter_count() + ff2.parameter_count();
}

template struct FastGhostConv<float>;
template struct FastGhostConv<double>;
template struct PositionAwarePool<float>;
template struct PositionAwarePool<double>;
template struct SemanticAlign<float>;
template struct SemanticAlign<double>;
template Tensor<float> sine_cosine_encoding<float>(Index, Index, Index);
template Tensor<double> sine_cosine_encoding<double>(Index, Index, Index);

}  // namespace mcdk::nn
