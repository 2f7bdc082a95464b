#include "cmrpipe/cli.hpp"

int main(int argc, char** argv) { return cmrpipe::run_cli(argc, argv); }
