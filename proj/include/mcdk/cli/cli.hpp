// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace mcdk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitNumeric = 2;

/// Entry point of the `mcdk` tool. Diagnostics go to `err`.
int run(int argc, char** argv);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace mcdk::cli
