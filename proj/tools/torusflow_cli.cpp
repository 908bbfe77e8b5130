#include <cstdio>

#include "torusflow/common.hpp"

// Subcommand dispatch lives in the header library so tests can drive the
// same entry points; this translation unit is just the process boundary.
int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::fprintf(stderr, "torusflow: no subcommands wired yet\n");
  return 2;
}
