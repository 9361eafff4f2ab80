#include <iostream>

#include "mtot/cli.hpp"

int main(int argc, char** argv) { return mtot::run_cli(argc, argv, std::cout, std::cerr); }
