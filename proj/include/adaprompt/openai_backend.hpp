#pragma once

#include "adaprompt/backend.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace adaprompt {

struct OpenAiConfig {
    /// Base URL including any path prefix, e.g. "https://api.openai.com/v1".
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::string model = "gpt-4o-mini";
    std::string embedding_model = "text-embedding-3-small";
    RetryPolicy retry;
    std::size_t max_in_flight = 4;
    double requests_per_minute = 0.0;
    std::chrono::seconds timeout{120};

    /// Reads AP_BACKEND_URL, AP_BACKEND_KEY, AP_BACKEND_MODEL and AP_EMBED_MODEL over the defaults.
    static OpenAiConfig from_env();
};

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

/// Splits "scheme://host[:port][/prefix]"; throws Error(InvalidConfig).
ParsedUrl parse_base_url(const std::string& url);

/// Chat-completions / embeddings client for any OpenAI-compatible server.
/// One request per sample: {model, messages: [{role: user, content}], temperature}.
class OpenAiBackend : public ModelBackend, public EmbeddingBackend {
public:
    explicit OpenAiBackend(OpenAiConfig config, Sleeper sleeper = sleep_for);
    ~OpenAiBackend() override;

    std::string complete(const std::string& prompt, double temperature, std::size_t sample_index) override;
    std::vector<double> embed(const std::string& text) override;
    [[nodiscard]] std::string identity() const override;

    [[nodiscard]] std::size_t attempts() const;
    [[nodiscard]] const RequestLimiter& limiter() const { return limiter_; }

private:
    std::string post_json(const std::string& route, const std::string& body);

    OpenAiConfig config_;
    ParsedUrl url_;
    Sleeper sleeper_;
    RequestLimiter limiter_;
    struct Counters;
    std::unique_ptr<Counters> counters_;
};

} // namespace adaprompt
