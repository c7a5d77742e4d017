// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/cli/cli.hpp"

int main(int argc, char** argv) { return mcdk::cli::run(argc, argv); }
