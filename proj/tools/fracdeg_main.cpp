#include "fracdeg/cli.hpp"

int main(int argc, char** argv) { return fracdeg::cli::run_cli(argc, argv); }
