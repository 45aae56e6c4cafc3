#include "mbwish/cli.hpp"

int main(int argc, char** argv) { return mbwish::cli::run(argc, argv); }
