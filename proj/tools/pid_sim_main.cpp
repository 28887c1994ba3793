#include <iostream>
#include <string>
#include <vector>

#include "pidsim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return pidsim::cli::run_cli(args, std::cout, std::cerr, std::cin);
}
