// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/kernel/kernel_pool.hpp"

namespace mcdk::kernel {

template <typename S>
KernelPool<S> KernelPool<S>::bernoulli(Index count, Index size, Rng& rng) {
  if (count < 2 || size < 1 || size % 2 == 0) {
    throw ConfigError("kernel pool needs q >= 2 and odd l, got q=" + std::to_string(count) +
                      " l=" + std::to_string(size));
  }
  KernelPool pool;
  pool.pi = Tensor<S>(Shape{count, size, size});
  for (S& v : pool.pi.mutable_data()) v = rng.bernoulli(0.5) ? S(1) : S(0);
  pool.pi.set_requires_grad(true);
  return pool;
}

template <typename S>
KernelAdjuster<S>::KernelAdjuster(Index feature_channels, Index count, Index size,
                                  Index descriptor_dim, Rng& rng, Index alpha_hidden_width)
    : excite(feature_channels, count, 1, rng),
      neighbor(1, 1, 5, 1, rng),
      alpha_hidden(size * size, alpha_hidden_width, rng),
      alpha_out(alpha_hidden_width, 1, rng),
      descriptor_collapse(1, 1, size, rng),
      descriptor_linear(count, descriptor_dim, rng) {
  descriptor_collapse.options.pad_h = 0;
  descriptor_collapse.options.pad_w = 0;
}

template <typename S>
AdjustedPool<S> KernelAdjuster<S>::operator()(const Tensor<S>& features,
                                              const KernelPool<S>& pool) const {
  const Index q = pool.count(), l = pool.size();
  if (features.rank() != 4 || features.dim(0) != 1) {
    throw DimensionError("adjust_kernels: features must be [1,C,h,w], got " +
                         shape_string(features.shape()));
  }
  if (features.dim(2) < l || features.dim(3) < l) {
    throw ConfigError("adjust_kernels: coarse features " + std::to_string(features.dim(2)) + "x" +
                      std::to_string(features.dim(3)) + " are smaller than kernel size " +
                      std::to_string(l) + "; use a shallower encoder or larger input");
  }
  const Tensor<S> pooled = ops::adaptive_avg_pool2d(features, l, l);
  const Tensor<S> excited = ops::reshape(excite(pooled), {1, 1, q, l * l});
  const Tensor<S> residual = ops::reshape(neighbor(excited), {q, l, l});

  const Tensor<S> gate_in = ops::reshape(ops::add(residual, pool.pi), {q, l * l});
  const Tensor<S> alpha = ops::reshape(
      ops::sigmoid(alpha_out(ops::relu(alpha_hidden(gate_in)))), {q, 1, 1});
  const Tensor<S> pi_bar =
      ops::add(ops::mul(ops::one_minus(alpha), pool.pi), ops::mul(alpha, residual));

  const Tensor<S> collapsed = descriptor_collapse(ops::reshape(pi_bar, {q, 1, l, l}));
  const Tensor<S> descriptor = descriptor_linear(ops::reshape(collapsed, {1, q}));
  return AdjustedPool<S>{residual, alpha, pi_bar, descriptor};
}

template <typename S>
void KernelAdjuster<S>::collect(ParamList<S>& out, const std::string& prefix) const {
  excite.collect(out, prefix + "/excite");
  neighbor.collect(out, prefix + "/neighbor");
  alpha_hidden.collect(out, prefix + "/alpha_hidden");
  alpha_out.collect(out, prefix + "/alpha_out");
  descriptor_collapse.collect(out, prefix + "/descriptor_collapse");
  descriptor_linear.collect(out, prefix + "/descriptor_linear");
}

template <typename S>
Index KernelAdjuster<S>::parameter_count() const {
  return excite.parameter_count() + neighbor.parameter_count() +
         alpha_hidden.parameter_count() + alpha_out.parameter_count() +
         descriptor_collapse.parameter_count() + descriptor_linear.parameter_count();
}

template <typename S>
KernelMapHead<S>::KernelMapHead(Index in_channels, Index width, Rng& rng)
    : conv1(in_channels, width, 3, rng),
      conv2(width, width, 3, rng),
      conv3(width, width, 3, rng),
      out(width, 2, 1, rng) {}

template <typename S>
Tensor<S> KernelMapHead<S>::operator()(const Tensor<S>& fine_features, const Tensor<S>& image,
                                       const Tensor<S>& gbuffers,
                                       const Tensor<S>& descriptor) const {
  const Index h = fine_features.dim(2), w = fine_features.dim(3);
  const Tensor<S> expanded = ops::mul(ops::reshape(descriptor, {1, descriptor.size(), 1, 1}),
                                      Tensor<S>::ones({1, 1, h, w}));
  const Tensor<S> x = ops::concat<S>({fine_features, image, gbuffers, expanded}, 1);
  const Tensor<S> hidden = ops::relu(conv3(ops::relu(conv2(ops::relu(conv1(x))))));
  return ops::tanh(out(hidden));
}

template <typename S>
void KernelMapHead<S>::collect(ParamList<S>& params, const std::string& prefix) const {
  conv1.collect(params, prefix + "/conv1");
  conv2.collect(params, prefix + "/conv2");
  conv3.collect(params, prefix + "/conv3");
  out.collect(params, prefix + "/out");
}

template <typename S>
Index KernelMapHead<S>::parameter_count() const {
  return conv1.parameter_count() + conv2.parameter_count() + conv3.parameter_count() +
         out.parameter_count();
}

template <typename S>
PixelKernels<S> interpolate_kernels(const Tensor<S>& pi_bar, const Tensor<S>& kernel_map) {
  if (pi_bar.rank() != 3 || pi_bar.dim(1) != pi_bar.dim(2)) {
    throw DimensionError("interpolate_kernels: pool must be [q,l,l], got " +
                         shape_string(pi_bar.shape()));
  }
  if (kernel_map.rank() != 4 || kernel_map.dim(0) != 1 || kernel_map.dim(1) != 2) {
    throw DimensionError("interpolate_kernels: kernel map must be [1,2,H,W], got " +
                         shape_string(kernel_map.shape()));
  }
  const Index q = pi_bar.dim(0), l = pi_bar.dim(1), taps = l * l;
  const Index h = kernel_map.dim(2), w = kernel_map.dim(3);
  const Tensor<S> bank = ops::softmax(ops::reshape(pi_bar, {q, taps}), 1);
  const Tensor<S> coords = ops::narrow(kernel_map, 1, 0, 1);
  const Tensor<S> sampled =
      ops::reshape(ops::permute(ops::grid_sample_1d(bank, coords), {1, 0}), {1, taps, h, w});
  const Tensor<S> weight = ops::affine(ops::narrow(kernel_map, 1, 1, 1), S(0.5), S(0.5));
  Tensor<S> identity(Shape{1, taps, 1, 1});
  identity[taps / 2] = S(1);
  const Tensor<S> blended =
      ops::add(ops::mul(ops::one_minus(weight), sampled), ops::mul(weight, identity));
  return PixelKernels<S>{sampled, blended};
}

template <typename S>
Tensor<S> interpolate_and_apply(const Tensor<S>& image, const Tensor<S>& pi_bar,
                                const Tensor<S>& kernel_map) {
  return ops::apply_pixel_kernels(image, interpolate_kernels(pi_bar, kernel_map).blended);
}

template struct KernelPool<float>;
template struct KernelPool<double>;
template struct KernelAdjuster<float>;
template struct KernelAdjuster<double>;
template struct KernelMapHead<float>;
template struct KernelMapHead<double>;
template PixelKernels<float> interpolate_kernels(const Tensor<float>&, const Tensor<float>&);
template PixelKernels<double> interpolate_kernels(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> interpolate_and_apply(const Tensor<float>&, const Tensor<float>&,
                                             const Tensor<float>&);
template Tensor<double> interpolate_and_apply(const Tensor<double>&, const Tensor<double>&,
                                              const Tensor<double>&);

}  // namespace mcdk::kernel
