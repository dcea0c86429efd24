#include "perco/cli.hpp"

int main(int argc, char** argv) { return perco::cli::run(argc, argv); }
