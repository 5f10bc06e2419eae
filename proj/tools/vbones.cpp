#include "vbones/cli.hpp"

int main(int argc, char** argv) { return vbones::cli::run(argc, argv); }
