#include <iostream>

#include "sagc/cli.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Training allocates and frees tens of megabytes per epoch; keep it on the heap.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    return sagc::cli::run(argc, argv, std::cout, std::cerr);
}
