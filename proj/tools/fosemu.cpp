#include "fosemu/cli.hpp"

int main(int argc, char** argv) { return fosemu::cli::main(argc, argv); }
