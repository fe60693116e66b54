#include "blindeval/cli.hpp"

int main(int argc, char** argv) { return blindeval::cli::main(argc, argv); }
