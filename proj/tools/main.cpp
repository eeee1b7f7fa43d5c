#include "cli.hpp"

int main(int argc, char** argv) { return selpred::cli::run(argc, argv); }
