#include <iostream>

#include "thyrovol/cli/cli.hpp"

int main(int argc, char** argv) { return thyrovol::cli::run(argc, argv, std::cout, std::cerr); }
