#include <iostream>

#include "steer/cli/app.hpp"

int main(int argc, char** argv) { return steer::cli::main_entry(argc, argv, std::cout, std::cerr); }
