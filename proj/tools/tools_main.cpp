#include "ecc/cli.hpp"

int main(int argc, char** argv) { return ecc::cli::run(argc, argv); }
