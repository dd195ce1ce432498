#include <iostream>

#include "overfit/cli.hpp"

int main(int argc, char** argv) { return overfit::cli::run(argc, argv, std::cout, std::cerr); }
