#include "vulninstruct/pipeline.hpp"

#include <iostream>

int main(int argc, char** argv) { return vulninstruct::run_subcommand(argc, argv, std::cout, std::cerr); }
