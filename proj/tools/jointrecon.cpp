#include "jointrecon/cli.hpp"

int main(int argc, char** argv) { return jointrecon::run_cli(argc, argv); }
