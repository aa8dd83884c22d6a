#include <iostream>

#include "eq/cli.hpp"

int main(int argc, char** argv) { return eq::cli::main(argc, argv, std::cout, std::cerr); }
