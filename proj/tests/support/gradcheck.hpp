// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mcdk/core/tensor.hpp"

namespace mcdk::testing {

struct GradCheckResult {
  double max_relative_error = 0;  // worst tensor
  std::string worst_tensor;
  std::size_t entries_checked = 0;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor<double>>>;

/// Compares reverse-mode gradients of a scalar loss with central differences.
/// `loss` must rebuild the computation from the current tensor values each
/// call. Per tensor the error is |a - n| / max(|a|, |n|) over the checked
/// entries (L2 norms); tensors whose gradients are both below `floor` count
/// as exact. With max_entries > 0 a deterministic subset is probed.
GradCheckResult check_gradients(const std::function<Tensor<double>()>& loss,
                                const NamedTensors& inputs, double eps = 1e-6,
                                std::size_t max_entries = 0, double floor = 1e-10);

}  // namespace mcdk::testing
