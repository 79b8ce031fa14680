#include <iostream>

#include "genplan/cli.hpp"

int main(int argc, char** argv) { return genplan::run_cli(argc, argv, std::cout, std::cerr); }
