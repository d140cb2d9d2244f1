#include <iostream>

#include "schemasift/cli.h"

int main(int argc, char** argv) { return schemasift::run_cli(argc, argv, std::cout, std::cerr); }
