#pragma once

#include "adaprompt/error.hpp"

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace adaprompt {

/// A text-completion model. Implementations must be callable concurrently.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    /// One completion of `prompt`. `sample_index` distinguishes independent
    /// samples of the same prompt; the HTTP adapter does not send it.
    virtual std::string complete(const std::string& prompt, double temperature, std::size_t sample_index) = 0;

    /// Stable id used in response-cache keys.
    [[nodiscard]] virtual std::string identity() const = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    virtual std::vector<double> embed(const std::string& text) = 0;
    [[nodiscard]] virtual std::string identity() const = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;

    /// Delay before retry number `retry` (1-based): base * factor^(retry-1).
    [[nodiscard]] std::chrono::milliseconds delay_before_retry(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void sleep_for(std::chrono::milliseconds delay) {
    std::this_thread::sleep_for(delay);
}

/// Runs `attempt` until it returns, retrying retryable BackendErrors with
/// exponential backoff. The last error surfaces once attempts run out.
template <typename Fn>
auto call_with_retry(const RetryPolicy& policy, Fn&& attempt, const Sleeper& sleeper = sleep_for) {
    for (int tried = 1;; ++tried) {
        try {
            return attempt();
        } catch (const BackendError& e) {
            if (!e.retryable() || tried >= policy.max_attempts) {
                throw;
            }
            sleeper(policy.delay_before_retry(tried));
        }
    }
}

/// Bounds concurrent requests and, optionally, requests per minute with a
/// token bucket whose burst equals max_in_flight.
class RequestLimiter {
public:
    explicit RequestLimiter(std::size_t max_in_flight, double requests_per_minute = 0.0);

    class Permit {
    public:
        explicit Permit(RequestLimiter* owner) : owner_(owner) {}
        Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit() {
            if (owner_ != nullptr) owner_->release();
        }

    private:
        RequestLimiter* owner_;
    };

    [[nodiscard]] Permit acquire();
    [[nodiscard]] std::size_t in_flight() const;
    [[nodiscard]] std::size_t peak_in_flight() const;

private:
    void release();

    using Clock = std::chrono::steady_clock;

    std::size_t max_in_flight_;
    double per_second_;
    double tokens_;
    Clock::time_point refilled_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

} // namespace adaprompt
