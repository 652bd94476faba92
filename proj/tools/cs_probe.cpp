#include <iostream>

#include "csprobe/cli.hpp"

int main(int argc, char** argv) { return csprobe::run_cli(argc, argv, std::cout, std::cerr); }
