#include <iostream>
#include <string>
#include <vector>

#include "wukong/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wukong::run_cli(args, std::cout, std::cerr);
}
