#include <iostream>
#include <string>
#include <vector>

#include "dtl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dtl::run_cli(args, std::cout, std::cerr);
}
