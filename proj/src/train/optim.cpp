// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/train/optim.hpp"

#include <cmath>
#include <numbers>

namespace mcdk::train {

double cosine_learning_rate(int epoch, int epochs, double lr_max, double lr_min) {
  if (epochs <= 1) return lr_max;
  const double progress = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename S>
double clip_gradients(nn::ParamList<S>& params, double max_norm) {
  double sq = 0;
  for (auto& [name, t] : params) {
    for (S g : t.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const auto factor = static_cast<S>(max_norm / norm);
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      for (S& g : t.grad_buffer()) g *= factor;
    }
  }
  return norm;
}

template <typename S>
Adam<S>::Adam(const nn::ParamList<S>& params, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const auto& [name, t] : params) {
    m_.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
  }
}

template <typename S>
void Adam<S>::step(nn::ParamList<S>& params, double learning_rate) {
  if (params.size() != m_.size()) {
    throw ConfigError("Adam: parameter list changed size since construction");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<S>& t = params[k].second;
    if (!t.has_grad()) continue;
    auto grad = t.grad();
    auto data = t.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double update = learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
      data[i] = static_cast<S>(data[i] - update);
    }
    t.zero_grad();
  }
}

template double clip_gradients(nn::ParamList<float>&, double);
template double clip_gradients(nn::ParamList<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace mcdk::train
