#pragma once

#include "adaprompt/backend.hpp"

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>

namespace adaprompt {

/// Identifies one sampled completion. The prompt enters only via its SHA-256.
struct CacheKey {
    std::string backend_identity;
    std::string prompt_sha256;
    double temperature = 0.0;
    std::size_t sample_index = 0;

    static CacheKey of(const ModelBackend& backend, const std::string& prompt, double temperature,
                       std::size_t sample_index);

    /// "v1|sha256|<identity>|<prompt hash>|<temperature %.17g>|<sample index>"
    [[nodiscard]] std::string canonical() const;
};

/// Content-addressed store of raw completions: one JSON file per key under
/// `directory`, named by the SHA-256 of the canonical key. Entries are
/// write-once; concurrent writers race on a hard link and the first wins.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path directory);

    [[nodiscard]] std::optional<std::string> get(const CacheKey& key) const;
    /// Returns false when an entry already existed (it is left untouched).
    bool put(const CacheKey& key, const std::string& response);

    [[nodiscard]] const std::filesystem::path& directory() const { return directory_; }
    [[nodiscard]] std::filesystem::path path_of(const CacheKey& key) const;

    [[nodiscard]] std::size_t hits() const { return hits_.load(); }
    [[nodiscard]] std::size_t misses() const { return misses_.load(); }

private:
    std::filesystem::path directory_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

/// Returns the cached completion or fetches it from the backend and stores
/// it. Backend errors propagate and nothing is stored.
std::string cache_get_or_fetch(ResponseCache& cache, ModelBackend& backend, const std::string& prompt,
                               double temperature, std::size_t sample_index);

} // namespace adaprompt
