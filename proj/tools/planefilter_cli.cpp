#include <iostream>

#include "planefilter/cli.hpp"

int main(int argc, char** argv) {
  return planefilter::cli::run(argc, argv, std::cout, std::cerr);
}
