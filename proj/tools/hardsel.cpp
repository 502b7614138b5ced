#include "hardsel/cli.hpp"

int main(int argc, char** argv) { return hardsel::cli::run(argc, argv); }
