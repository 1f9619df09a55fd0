#include <iostream>
#include <string>
#include <vector>

#include "nudge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nudge::run_cli(args, std::cout, std::cerr);
}
