#include <iostream>

#include "fvkit/cli.hpp"

int main(int argc, char** argv) {
  return fvkit::run_subcommand(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
