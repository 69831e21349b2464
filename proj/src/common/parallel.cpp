#include "elm/common/parallel.hpp"

#include <algorithm>

namespace elm {

std::vector<TaskFailure> parallel_for(std::size_t n, std::size_t max_parallel,
                                      const std::function<void(std::size_t)>& fn) {
    std::vector<TaskFailure> failures;
    std::mutex failures_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failures_mutex);
                failures.push_back({i, std::current_exception()});
            }
        }
    };
    const std::size_t threads = std::min(n, std::max<std::size_t>(1, max_parallel));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    std::sort(failures.begin(), failures.end(),
              [](const TaskFailure& a, const TaskFailure& b) { return a.index < b.index; });
    return failures;
}

TokenBucket::TokenBucket(double tokens_per_second, double burst)
    : rate_(tokens_per_second), burst_(std::max(1.0, burst)), tokens_(burst_), last_(Clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0.0) return;
    for (;;) {
        std::chrono::duration<double> wait{};
        {
            std::lock_guard lock(mutex_);
            const auto now = Clock::now();
            tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        }
        std::this_thread::sleep_for(wait);
    }
}

}  // namespace elm
