#include <iostream>

#include "xaihealth/cli.hpp"

int main(int argc, char** argv) { return xaihealth::run_cli(argc, argv, std::cout, std::cerr); }
