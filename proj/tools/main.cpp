#include "sewhar/cli.hpp"

#include <iostream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Batch activations are tens of MB; without this glibc maps and unmaps them
  // on every step and page faults dominate system time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return sewhar::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
