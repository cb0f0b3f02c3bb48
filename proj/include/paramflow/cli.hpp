// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line surface. Exit codes: 0 success, 2 invalid configuration or
// arguments, 3 training aborted, 4 initial-condition fit failed.

#include <string>
#include <vector>

namespace pf::cli {

int run_cli(int argc, const char* const* argv);

// convenience for in-process tests
int run_cli(const std::vector<std::string>& args);

}  // namespace pf::cli
