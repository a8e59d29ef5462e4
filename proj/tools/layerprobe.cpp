#include "layerprobe/cli.hpp"

#include <iostream>

int main(int argc, char **argv) {
  return layerprobe::run_cli(argc, argv, std::cout, std::cerr);
}
