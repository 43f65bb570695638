#include <iostream>

#include "sqh/cli.hpp"

int main(int argc, char** argv) { return sqh::cli::run(argc, argv, std::cout, std::cerr); }
