// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace catnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `catnet <args...>` (program name excluded) and returns
/// the process exit code. Subcommands: gen, train, eval, ablate, export-attention.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace catnet::cli
