#include <iostream>

#include "fluidest/cli.hpp"

int main(int argc, char** argv) { return fluidest::cli::run(argc, argv, std::cout, std::cerr); }
