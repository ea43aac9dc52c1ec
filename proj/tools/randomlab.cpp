#include "randomlab/cli.hpp"

int main(int argc, char** argv) { return randomlab::run_cli(argc, argv); }
