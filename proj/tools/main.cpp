#include "cli.hpp"

int main(int argc, char** argv) { return tailsampler::cli::run_cli(argc, argv); }
