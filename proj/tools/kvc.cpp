#include <iostream>

#include "kvc/cli.hpp"

int main(int argc, char** argv) { return kvc::cli::run(argc, argv, std::cout, std::cerr); }
