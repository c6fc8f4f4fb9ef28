#include "stylebridge/cli.hpp"

int main(int argc, char** argv) { return stylebridge::run_cli(argc, argv); }
