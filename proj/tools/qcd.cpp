#include "qcd/cli.hpp"

int main(int argc, char** argv) { return qcd::cli::main(argc, argv); }
