#include <iostream>

#include "ssw/cli.hpp"

int main(int argc, char** argv) { return ssw::cli::run(argc, argv, std::cout, std::cerr); }
