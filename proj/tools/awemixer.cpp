#include "awemixer/cli.hpp"

int main(int argc, char** argv) { return awemixer::cli::run(argc, argv); }
