#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

namespace adaprompt {

/// Lowercase hex SHA-256 of the exact bytes.
std::string sha256_hex(std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes);

/// Seeded generator whose draws are identical on every standard library:
/// std::mt19937_64 is fully specified, the distributions below are ours.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound), bound >= 1. Rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double unit();

private:
    std::mt19937_64 engine_;
};

} // namespace adaprompt
