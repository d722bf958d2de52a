#include <iostream>
#include <string>
#include <vector>

#include "pdnac_cli/cli.hpp"

int main(int argc, char** argv) {
  return pdnac::cli::main(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
