#include "habtox/cli.hpp"

int main(int argc, char** argv) { return habtox::cli::run(argc, argv); }
