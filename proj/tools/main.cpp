#include "cli.hpp"

int main(int argc, char** argv) { return ccax::cli::run(argc, argv); }
