#include "adaprompt/backend.hpp"

#include <algorithm>
#include <cmath>

namespace adaprompt {

std::chrono::milliseconds RetryPolicy::delay_before_retry(int retry) const {
    const double scale = std::pow(factor, std::max(0, retry - 1));
    return std::chrono::milliseconds(static_cast<long long>(static_cast<double>(base_delay.count()) * scale));
}

RequestLimiter::RequestLimiter(std::size_t max_in_flight, double requests_per_minute)
    : max_in_flight_(std::max<std::size_t>(1, max_in_flight)),
      per_second_(requests_per_minute / 60.0),
      tokens_(static_cast<double>(max_in_flight_)),
      refilled_(Clock::now()) {}

RequestLimiter::Permit RequestLimiter::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        if (in_flight_ < max_in_flight_) {
            if (per_second_ <= 0.0) {
                break;
            }
            const auto now = Clock::now();
            const std::chrono::duration<double> elapsed = now - refilled_;
            tokens_ = std::min(static_cast<double>(max_in_flight_), tokens_ + elapsed.count() * per_second_);
            refilled_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                break;
            }
            const auto wait = std::chrono::duration<double>((1.0 - tokens_) / per_second_);
            cv_.wait_for(lock, wait);
        } else {
            cv_.wait(lock);
        }
    }
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
    return Permit(this);
}

void RequestLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t RequestLimiter::in_flight() const {
    std::lock_guard lock(mutex_);
    return in_flight_;
}

std::size_t RequestLimiter::peak_in_flight() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

} // namespace adaprompt
