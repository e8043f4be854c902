#include "baryflow/cli.hpp"

int main(int argc, char** argv) { return baryflow::cli::run(argc, argv); }
