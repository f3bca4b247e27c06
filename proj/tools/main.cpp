#include "cli.hpp"

int main(int argc, char** argv) { return probeopt::cli::run(argc, argv); }
