#pragma once

namespace p2p {

/// Keeps large freed buffers inside the heap so that per-step activation
/// allocations reuse warm pages instead of faulting in fresh ones. Call once
/// at program start; a no-op outside glibc.
void configure_allocator();

}  // namespace p2p
