#include "maturix/cli.hpp"

int main(int argc, char** argv) { return maturix::cli::run(argc, argv); }
