#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace elm {

struct RetryPolicy {
    int count = 3;          // retries after the first attempt
    int backoff_ms = 500;   // doubled after each failed attempt
};

struct TaskFailure {
    std::size_t index;
    std::exception_ptr error;
};

// Runs fn(i) for i in [0, n) on at most max_parallel threads. Failures are
// collected, never rethrown; the returned list is sorted by index.
std::vector<TaskFailure> parallel_for(std::size_t n, std::size_t max_parallel,
                                      const std::function<void(std::size_t)>& fn);

// Token-bucket rate limiter shared by concurrent callers.
class TokenBucket {
public:
    // rate <= 0 disables limiting
    TokenBucket(double tokens_per_second, double burst);
    void acquire();

private:
    using Clock = std::chrono::steady_clock;
    double rate_;
    double burst_;
    double tokens_;
    Clock::time_point last_;
    std::mutex mutex_;
};

// Calls fn until it succeeds or the policy is exhausted. should_retry decides
// whether an exception is transient; non-transient errors propagate at once.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn,
                const std::function<bool(const std::exception&)>& should_retry) -> decltype(fn(0)) {
    int delay = policy.backoff_ms;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn(attempt);
        } catch (const std::exception& e) {
            if (attempt >= policy.count || !should_retry(e)) throw;
        }
        if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        delay *= 2;
    }
}

}  // namespace elm
