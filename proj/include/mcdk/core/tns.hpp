// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include "mcdk/core/tensor.hpp"

namespace mcdk {

// TNS container: "TNS1", u32 LE rank, rank x u32 LE extents, then the
// float32 LE payload in row-major order.

void write_tns(std::ostream& out, const Tensor<float>& tensor);
Tensor<float> read_tns(std::istream& in);

void save_tns(const std::filesystem::path& path, const Tensor<float>& tensor);
Tensor<float> load_tns(const std::filesystem::path& path);

}  // namespace mcdk
