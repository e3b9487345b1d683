#include "p2p/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ on glibc targets

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace p2p {

void configure_allocator() {
#if defined(__GLIBC__)
  // 32 MiB is the largest mmap threshold glibc accepts on 64-bit targets.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace p2p
