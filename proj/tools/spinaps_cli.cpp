#include "spinaps/cli.hpp"

int main(int argc, char** argv) { return spinaps::cli::run(argc, argv); }
