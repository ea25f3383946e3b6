// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#include "fvsrn/cli.hpp"

int main(int argc, char** argv) { return fvsrn::run_cli(argc, argv); }
