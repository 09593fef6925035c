// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace aep::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `aep` tool. Usage errors return 2, runtime failures 1.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aep::harness
