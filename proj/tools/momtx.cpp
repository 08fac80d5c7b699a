// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "momtx/cli/commands.hpp"

int main(int argc, char** argv) { return momtx::cli::run(argc, argv, std::cout, std::cerr); }
