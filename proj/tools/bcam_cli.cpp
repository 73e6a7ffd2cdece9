#include <iostream>
#include <string>
#include <vector>

#include "bcam/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bcam::run_cli(args, std::cout, std::cerr);
}
