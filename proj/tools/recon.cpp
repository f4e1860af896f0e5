#include "recon/cli.hpp"

int main(int argc, char** argv) { return recon::cli::run_command(argc, argv); }
