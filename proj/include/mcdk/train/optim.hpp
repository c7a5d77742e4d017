// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mcdk/nn/layers.hpp"

namespace mcdk::train {

/// lr(e) = lr_min + (lr_max - lr_min) (1 + cos(pi e / (epochs - 1))) / 2, so
/// the first epoch uses lr_max and the last lr_min.
double cosine_learning_rate(int epoch, int epochs, double lr_max, double lr_min);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename S>
double clip_gradients(nn::ParamList<S>& params, double max_norm);

template <typename S>
class Adam {
 public:
  explicit Adam(const nn::ParamList<S>& params, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  /// Applies one update from the parameters' current gradients, then clears
  /// them. Parameters without a gradient are left untouched.
  void step(nn::ParamList<S>& params, double learning_rate);

  long long steps() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace mcdk::train
