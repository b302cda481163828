#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dnlspde {

/// Owns the degree of parallelism for index-parallel work. Work items write
/// into per-index slots and callers reduce in index order, so results never
/// depend on the worker count.
class WorkerPool {
public:
    explicit WorkerPool(unsigned workers = 1) : workers_(std::max(1u, workers)) {}

    unsigned size() const noexcept { return workers_; }

    /// Calls f(i) for every i in [0, count). If any call throws, the exception
    /// from the lowest index is rethrown after all workers finish.
    template <class F>
    void for_each_index(std::size_t count, F&& f) const {
        if (count == 0) return;
        const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers_, count));
        if (n_threads == 1) {
            for (std::size_t i = 0; i < count; ++i) f(i);
            return;
        }

        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::exception_ptr first_error;
        std::size_t first_error_index = count;

        auto body = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= count) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (i < first_error_index) {
                        first_error_index = i;
                        first_error = std::current_exception();
                    }
                }
            }
        };

        {
            std::vector<std::jthread> threads;
            threads.reserve(n_threads);
            for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(body);
        }
        if (first_error) std::rethrow_exception(first_error);
    }

private:
    unsigned workers_;
};

} // namespace dnlspde
