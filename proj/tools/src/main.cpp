#include <iostream>

#include "ofm_cli/cli.hpp"

int main(int argc, char** argv) { return ofm::cli::run_cli(argc, argv, std::cout, std::cerr); }
