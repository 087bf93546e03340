#ifndef EMBP_PARALLEL_HPP
#define EMBP_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace embp {

/// Worker count: EMBP_THREADS env var if set, else hardware concurrency.
int default_threads();

/// Static-chunked parallel loop over [0, count). Each index is processed
/// exactly once; callers write results into per-index slots and reduce
/// sequentially afterwards, so output bytes never depend on the thread
/// count.
void parallel_for(std::uint64_t count,
                  const std::function<void(std::uint64_t)>& fn,
                  int threads = 0);

} // namespace embp

#endif
