#include <iostream>
#include <string>
#include <vector>

#include "prime/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return prime::run_cli(args, std::cout, std::cerr);
}
