#include <iostream>

#include "sysid/commands.hpp"

int main(int argc, char** argv) { return sysid::run_cli(argc, argv, std::cout, std::cerr); }
