#include <iostream>
#include <string>
#include <vector>

#include "pucl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pucl::run(args, std::cout, std::cerr);
}
