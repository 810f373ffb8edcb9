#include <iostream>

#include "fdest_cli/commands.hpp"

int main(int argc, char** argv) { return fdest::cli::run(argc, argv, std::cout, std::cerr); }
