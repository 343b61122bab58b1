#include "skewersim/harness/cli.hpp"

int main(int argc, char** argv) { return skewersim::harness::run_cli(argc, argv); }
