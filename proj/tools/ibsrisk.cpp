#include <iostream>
#include <string>
#include <vector>

#include "ibsrisk/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ibsrisk::cli::run(std::move(args), std::cout, std::cerr);
}
