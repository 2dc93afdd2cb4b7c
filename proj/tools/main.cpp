#include "cli.hpp"

int main(int argc, char** argv) { return perturbeval::cli::run_command(argc, argv); }
