#include "csiadv/util/malloc_tuning.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace csiadv {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc's upper bound for this knob
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace csiadv
