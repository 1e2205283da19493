#include "segan/cli.hpp"

int main(int argc, char** argv) { return segan::run_cli(argc, argv); }
