#include "tcbsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace tcbsde {

namespace {
int g_worker_threads = 1;
}

void set_worker_threads(int count) { g_worker_threads = std::max(1, count); }

int worker_threads() { return g_worker_threads; }

void parallel_blocks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t blocks = (count + kParallelBlockSize - 1) / kParallelBlockSize;
    const int threads = std::min<std::size_t>(g_worker_threads, blocks);
    if (threads <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) {
            const std::size_t lo = b * kParallelBlockSize;
            fn(lo, std::min(lo + kParallelBlockSize, count));
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= blocks || failed.load()) return;
                const std::size_t lo = b * kParallelBlockSize;
                try {
                    fn(lo, std::min(lo + kParallelBlockSize, count));
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace tcbsde
