#include "rankstab/cli.hpp"

int main(int argc, char** argv) { return rankstab::cli::main(argc, argv); }
