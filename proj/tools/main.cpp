#include <iostream>

#include "hmest/cli.hpp"

int main(int argc, char** argv) { return hmest::cli::run(argc, argv, std::cout, std::cerr); }
