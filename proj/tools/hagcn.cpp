#include "hagcn/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hagcn::cli_main(argc, argv, std::cout, std::cerr); }
