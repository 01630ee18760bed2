#ifndef FUZZYSEG_HEAP_HPP
#define FUZZYSEG_HEAP_HPP

namespace fuzzyseg {

/// Asks the allocator to keep freed large blocks instead of returning them to
/// the OS. Training and inference allocate the same multi-megabyte buffers on
/// every step; without this, glibc maps and unmaps them each time and page
/// faults dominate the runtime. No effect on other C libraries. Idempotent.
void retain_freed_memory();

}  // namespace fuzzyseg

#endif  // FUZZYSEG_HEAP_HPP
