#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace gldp {

/// Resolve a thread-count option: 0 means "use available parallelism".
inline int resolve_threads(int threads) {
    if (threads > 0) return threads;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Run `fn(chunk_index, begin, end)` over [0, n) split into fixed-size
/// chunks. Chunk boundaries depend only on `n` and `chunk_size`, never on
/// the thread count, so any reduction that writes per-chunk slots and
/// combines them in chunk order yields bit-identical results for every
/// thread count.
inline void parallel_chunks(int64_t n, int64_t chunk_size, int threads,
                            const std::function<void(int64_t, int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    if (chunk_size <= 0) chunk_size = 1;
    const int64_t n_chunks = (n + chunk_size - 1) / chunk_size;
    threads = resolve_threads(threads);
    if (threads <= 1 || n_chunks == 1) {
        for (int64_t c = 0; c < n_chunks; ++c) {
            const int64_t b = c * chunk_size;
            fn(c, b, std::min(n, b + chunk_size));
        }
        return;
    }

    std::atomic<int64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const int64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) break;
            const int64_t b = c * chunk_size;
            fn(c, b, std::min(n, b + chunk_size));
        }
    };
    std::vector<std::thread> pool;
    const int n_workers = static_cast<int>(std::min<int64_t>(threads, n_chunks));
    pool.reserve(static_cast<size_t>(n_workers) - 1);
    for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

/// Number of chunks produced by parallel_chunks for the same arguments.
inline int64_t chunk_count(int64_t n, int64_t chunk_size) {
    if (n <= 0) return 0;
    if (chunk_size <= 0) chunk_size = 1;
    return (n + chunk_size - 1) / chunk_size;
}

} // namespace gldp
