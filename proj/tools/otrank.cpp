#include "otrank/cli.hpp"

int main(int argc, char** argv) { return otrank::cli::run(argc, argv); }
