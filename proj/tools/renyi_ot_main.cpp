#include "renyi_ot/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return renyi_ot::cli_main(argc, argv, std::cout, std::cerr); }
