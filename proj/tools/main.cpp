#include <iostream>

#include "deepframe/cli.hpp"

int main(int argc, char** argv) { return deepframe::run_cli(argc, argv, std::cout, std::cerr); }
