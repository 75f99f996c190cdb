#include "stackcount/cli.h"

#include <cstdio>

namespace stackcount {

int run_cli(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::fprintf(stderr, "stackcount: command wiring pending\n");
  return 2;
}

}  // namespace stackcount
