#include "elm/cli/cli.hpp"

int main(int argc, char** argv) { return elm::cli::run_cli(argc, argv); }
