#include <iostream>
#include <string>
#include <vector>

#include "wasscert/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wasscert::run(args, std::cout, std::cerr);
}
