#include "sncd/cli.hpp"

int main(int argc, char** argv) { return sncd::cli::run(argc, argv); }
