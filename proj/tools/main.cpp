#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return tagsynth::cli::dispatch(argc, argv, std::cout); }
