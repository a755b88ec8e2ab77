#ifndef FSE_PARALLEL_HPP
#define FSE_PARALLEL_HPP

/**
 * @file parallel.hpp
 * @brief Minimal fork-join loop over independent tasks.
 */

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fse {

/**
 * Runs `task(i)` for i in [0, count) on up to `workers` threads. Tasks are
 * handed out dynamically, so each must write only to its own output slot.
 * If any task throws, remaining tasks are skipped and the exception from the
 * lowest failing index is rethrown on the calling thread.
 */
template <class Task>
void parallel_for(int workers, std::size_t count, Task&& task) {
    if (count == 0) return;
    const std::size_t pool = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
    if (pool == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_index = count;

    auto run = [&]() {
        while (!abort.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                abort.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(pool - 1);
    for (std::size_t w = 0; w + 1 < pool; ++w) threads.emplace_back(run);
    run();
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace fse

#endif
