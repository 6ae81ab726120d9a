#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "drm/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Grid search allocates and frees many mid-sized matrices; keep them on the
  // heap instead of mapping and unmapping pages for each one.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  std::vector<std::string> args(argv + 1, argv + argc);
  return drm::cli::run(args, std::cout, std::cerr);
}
