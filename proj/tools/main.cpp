#include <iostream>

#include "nsamc/cli.hpp"

int main(int argc, char** argv) { return nsamc::cli_dispatch(argc, argv, std::cout, std::cerr); }
