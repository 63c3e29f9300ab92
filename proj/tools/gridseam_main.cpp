#include <iostream>
#include <vector>

#include "gridseam/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gridseam::run_cli(args, std::cout, std::cerr);
}
