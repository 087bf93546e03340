#include "embp/parallel.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace embp {

int default_threads() {
    if (const char* env = std::getenv("EMBP_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::uint64_t count,
                  const std::function<void(std::uint64_t)>& fn,
                  int threads) {
    if (threads <= 0) threads = default_threads();
    if (threads == 1 || count <= 1) {
        for (std::uint64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const auto workers = static_cast<std::uint64_t>(threads);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::uint64_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::uint64_t i = w; i < count; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace embp
