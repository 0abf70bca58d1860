#include "entropytest/cli.hpp"

int main(int argc, char** argv) { return entropytest::cli_main(argc, argv); }
