#include "rotdeg/cli.hpp"

int main(int argc, char** argv) { return rotdeg::cli::main(argc, argv); }
