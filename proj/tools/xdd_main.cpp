#include <iostream>

#include "xdd/cli.hpp"

int main(int argc, char** argv) { return xdd::cli::run(argc, argv, std::cout, std::cerr); }
