// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mcdk {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree with an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (scene, network, training settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed persisted data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during training or inference.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff graph (e.g. a second backward pass).
class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcdk
