#include "confsplat/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return confsplat::cli::dispatch(argc, argv, std::cout, std::cerr); }
