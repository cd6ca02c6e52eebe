#include <iostream>
#include <string>
#include <vector>

#include "lst/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lst::run_command(args, std::cout, std::cerr);
}
