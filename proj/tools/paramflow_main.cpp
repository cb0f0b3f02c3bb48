// SPDX-License-Identifier: Apache-2.0
#include "paramflow/cli.hpp"

int main(int argc, char** argv) { return pf::cli::run_cli(argc, argv); }
