#include "cdfh/cli.hpp"

int main(int argc, char** argv) { return cdfh::cli::run(argc, argv); }
