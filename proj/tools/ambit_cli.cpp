#include "ambit/cli.hpp"

int main(int argc, char** argv) { return ambit::cli::run(argc, argv); }
