#include "lyapds/cli.hpp"

int main(int argc, char** argv) { return lyapds::cli_main(argc, argv); }
