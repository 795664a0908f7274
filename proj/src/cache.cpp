#include "adaprompt/cache.hpp"

#include "adaprompt/hashing.hpp"
#include "adaprompt/json_io.hpp"

#include <cerrno>
#include <cstdio>
#include <system_error>
#include <thread>
#include <unistd.h>

namespace adaprompt {

CacheKey CacheKey::of(const ModelBackend& backend, const std::string& prompt, double temperature,
                      std::size_t sample_index) {
    return {backend.identity(), sha256_hex(prompt), temperature, sample_index};
}

std::string CacheKey::canonical() const {
    char temp[64];
    std::snprintf(temp, sizeof temp, "%.17g", temperature);
    return "v1|sha256|" + backend_identity + "|" + prompt_sha256 + "|" + temp + "|" + std::to_string(sample_index);
}

ResponseCache::ResponseCache(std::filesystem::path directory) : directory_(std::move(directory)) {
    std::filesystem::create_directories(directory_);
}

std::filesystem::path ResponseCache::path_of(const CacheKey& key) const {
    const auto digest = sha256_hex(key.canonical());
    return directory_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) const {
    const auto path = path_of(key);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        ++misses_;
        return std::nullopt;
    }
    try {
        const auto entry = json::parse(read_file(path));
        if (entry.at("key").get<std::string>() != key.canonical()) {
            ++misses_;
            return std::nullopt;
        }
        ++hits_;
        return entry.at("response").get<std::string>();
    } catch (const std::exception&) {
        ++misses_;
        return std::nullopt;
    }
}

bool ResponseCache::put(const CacheKey& key, const std::string& response) {
    const auto path = path_of(key);
    std::filesystem::create_directories(path.parent_path());
    const json entry{
        {"version", kFormatVersion},
        {"key", key.canonical()},
        {"backend", key.backend_identity},
        {"prompt_sha256", key.prompt_sha256},
        {"temperature", key.temperature},
        {"sample_index", key.sample_index},
        {"response", response},
    };
    auto temp = path;
    temp += ".tmp." + std::to_string(::getpid()) + "." +
            std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::FILE* f = std::fopen(temp.c_str(), "wb");
        if (f == nullptr) {
            throw std::system_error(errno, std::generic_category(), "cannot write cache entry " + temp.string());
        }
        const auto text = entry.dump() + "\n";
        const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
        std::fclose(f);
        if (!ok) {
            std::filesystem::remove(temp);
            throw std::system_error(EIO, std::generic_category(), "short write " + temp.string());
        }
    }
    // link(2) fails with EEXIST when another writer got there first.
    const bool created = ::link(temp.c_str(), path.c_str()) == 0;
    const int err = errno;
    std::filesystem::remove(temp);
    if (!created && err != EEXIST) {
        throw std::system_error(err, std::generic_category(), "cannot publish cache entry " + path.string());
    }
    return created;
}

std::string cache_get_or_fetch(ResponseCache& cache, ModelBackend& backend, const std::string& prompt,
                               double temperature, std::size_t sample_index) {
    const auto key = CacheKey::of(backend, prompt, temperature, sample_index);
    if (auto hit = cache.get(key)) {
        return *hit;
    }
    auto response = backend.complete(prompt, temperature, sample_index);
    if (!cache.put(key, response)) {
        if (auto winner = cache.get(key)) {
            return *winner;
        }
    }
    return response;
}

} // namespace adaprompt
