#include <iostream>
#include <string>
#include <vector>

#include "notevec/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return notevec::cli::run(args, std::cout, std::cerr);
}
