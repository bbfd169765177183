#include <iostream>

#include "sigpointer/cli/commands.hpp"

int main(int argc, char** argv) { return sigpointer::cli::run_cli(argc, argv, std::cout, std::cerr); }
