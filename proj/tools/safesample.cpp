#include <iostream>

#include "safesample/cli.hpp"

int main(int argc, char** argv) {
  return safesample::cli::run(argc, argv, std::cout, std::cerr);
}
