// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "catnet_cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return catnet::cli::run(args, std::cout, std::cerr);
}
