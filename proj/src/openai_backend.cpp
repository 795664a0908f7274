#include "adaprompt/openai_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>

namespace adaprompt {

using json = nlohmann::json;

struct OpenAiBackend::Counters {
    std::atomic<std::size_t> attempts{0};
};

OpenAiConfig OpenAiConfig::from_env() {
    OpenAiConfig config;
    if (const char* url = std::getenv("AP_BACKEND_URL"); url != nullptr && *url != '\0') config.base_url = url;
    if (const char* key = std::getenv("AP_BACKEND_KEY"); key != nullptr) config.api_key = key;
    if (const char* model = std::getenv("AP_BACKEND_MODEL"); model != nullptr && *model != '\0') config.model = model;
    if (const char* embed = std::getenv("AP_EMBED_MODEL"); embed != nullptr && *embed != '\0') {
        config.embedding_model = embed;
    }
    return config;
}

ParsedUrl parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "backend URL '" + url + "' has no scheme");
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw Error(ErrorCode::InvalidConfig, "backend URL scheme must be http or https");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    parsed.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        parsed.path_prefix = url.substr(path_start);
        while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') {
            parsed.path_prefix.pop_back();
        }
    }
    if (parsed.scheme_host_port.size() <= scheme_end + 3) {
        throw Error(ErrorCode::InvalidConfig, "backend URL '" + url + "' has no host");
    }
    return parsed;
}

OpenAiBackend::OpenAiBackend(OpenAiConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      url_(parse_base_url(config_.base_url)),
      sleeper_(std::move(sleeper)),
      limiter_(config_.max_in_flight, config_.requests_per_minute),
      counters_(std::make_unique<Counters>()) {}

OpenAiBackend::~OpenAiBackend() = default;

std::string OpenAiBackend::identity() const {
    return "openai:" + config_.base_url + "|" + config_.model;
}

std::size_t OpenAiBackend::attempts() const {
    return counters_->attempts.load();
}

std::string OpenAiBackend::post_json(const std::string& route, const std::string& body) {
    return call_with_retry(
        config_.retry,
        [&]() -> std::string {
            auto permit = limiter_.acquire();
            ++counters_->attempts;
            httplib::Client client(url_.scheme_host_port);
            client.set_connection_timeout(std::chrono::seconds(10));
            client.set_read_timeout(config_.timeout);
            client.set_write_timeout(config_.timeout);
            httplib::Headers headers;
            if (!config_.api_key.empty()) {
                headers.emplace("Authorization", "Bearer " + config_.api_key);
            }
            auto result = client.Post(url_.path_prefix + route, headers, body, "application/json");
            if (!result) {
                throw BackendError::make(BackendErrorKind::Network, httplib::to_string(result.error()));
            }
            const int status = result->status;
            if (status == 401 || status == 403) {
                throw BackendError::make(BackendErrorKind::AuthFailed, "HTTP " + std::to_string(status));
            }
            if (status == 429) {
                throw BackendError::make(BackendErrorKind::RateLimited, "HTTP 429");
            }
            if (status >= 500) {
                throw BackendError::make(BackendErrorKind::ServerError, "HTTP " + std::to_string(status));
            }
            if (status != 200) {
                throw BackendError(BackendErrorKind::ServerError, false,
                                   "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200));
            }
            return result->body;
        },
        sleeper_);
}

std::string OpenAiBackend::complete(const std::string& prompt, double temperature, std::size_t /*sample_index*/) {
    const json request{
        {"model", config_.model},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", temperature},
    };
    const auto body = post_json("/chat/completions", request.dump());
    try {
        const auto reply = json::parse(body);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError::make(BackendErrorKind::MalformedReply, e.what());
    }
}

std::vector<double> OpenAiBackend::embed(const std::string& text) {
    const json request{{"model", config_.embedding_model}, {"input", text}};
    const auto body = post_json("/embeddings", request.dump());
    try {
        return json::parse(body).at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw BackendError::make(BackendErrorKind::MalformedReply, e.what());
    }
}

} // namespace adaprompt
