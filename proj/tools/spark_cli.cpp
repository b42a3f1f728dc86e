#include "spark/cli.hpp"

int main(int argc, char** argv) { return spark::run_cli(argc, argv); }
