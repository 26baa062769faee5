#include "spark/cli.hpp"

int main(int argc, char** argv) { return spark::cli::run(argc, argv); }
