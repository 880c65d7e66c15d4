#include "mixerforge/cli/cli.hpp"

int main(int argc, char** argv) { return mixerforge::cli::run(argc, argv); }
