#pragma once

namespace csiadv {

/// Keeps large activation buffers on the heap instead of fresh mmap'd pages.
/// Training allocates and frees many multi-megabyte tensors per step; with the
/// glibc defaults each one faults its pages in again. No-op off glibc.
void tune_allocator();

}  // namespace csiadv
