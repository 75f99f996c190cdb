#include "stackcount/cli.h"

int main(int argc, char** argv) { return stackcount::run_cli(argc, argv); }
