#include <iostream>
#include <string>
#include <vector>

#include "ovcost/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ovc::cli::run(args, std::cout, std::cerr);
}
