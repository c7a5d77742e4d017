// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>

namespace mcdk {

/// Worker count from MCDK_THREADS, defaulting to the number of logical cores.
int worker_count();

/// Runs body(i) for i in [begin, end). Work items are split into contiguous
/// chunks; each item must write only to its own outputs so that results do
/// not depend on the worker count.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t)>& body);

}  // namespace mcdk
