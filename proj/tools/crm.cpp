#include <iostream>

#include "crm/cli.hpp"

int main(int argc, char** argv) { return crm::cli_main(argc, argv, std::cout, std::cerr); }
