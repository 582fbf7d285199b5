#include "wgsim/cli.hpp"

int main(int argc, char** argv) { return wgsim::cli::dispatch(argc, argv); }
