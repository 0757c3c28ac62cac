// Copyright 2026 The SSHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssht/cli.hpp"

int main(int argc, char** argv) { return ssht::cli_main(argc, argv); }
