#include <iostream>

#include "logitforge/cli.hpp"

int main(int argc, char** argv) { return logitforge::cli_run(argc, argv, std::cout, std::cerr); }
