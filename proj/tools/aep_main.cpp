// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "aep/harness/cli.hpp"

int main(int argc, char** argv) {
  return aep::harness::cli_main(argc, argv, std::cout, std::cerr);
}
