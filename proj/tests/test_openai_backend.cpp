#include "adaprompt/error.hpp"
#include "adaprompt/json_io.hpp"
#include "adaprompt/openai_backend.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <atomic>

using namespace adaprompt;

namespace {

json chat_reply(const std::string& content) {
    return {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
}

struct Recorded {
    std::vector<std::chrono::milliseconds> sleeps;
    Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
    }
};

OpenAiConfig config_for(const testing::LocalServer& server) {
    OpenAiConfig config;
    config.base_url = server.url() + "/v1";
    config.api_key = "secret";
    config.model = "tiny";
    config.retry.base_delay = std::chrono::milliseconds(1);
    return config;
}

} // namespace

TEST_CASE("base URL parsing") {
    const auto a = parse_base_url("https://api.example.com/v1/");
    CHECK(a.scheme_host_port == "https://api.example.com");
    CHECK(a.path_prefix == "/v1");
    const auto b = parse_base_url("http://localhost:8000");
    CHECK(b.scheme_host_port == "http://localhost:8000");
    CHECK(b.path_prefix.empty());
    CHECK_THROWS_AS(parse_base_url("localhost:8000"), Error);
    CHECK_THROWS_AS(parse_base_url("ftp://x"), Error);
    CHECK_THROWS_AS(parse_base_url("http://"), Error);
}

TEST_CASE("retry delays grow geometrically") {
    RetryPolicy policy;
    CHECK(policy.delay_before_retry(1) == std::chrono::milliseconds(1000));
    CHECK(policy.delay_before_retry(2) == std::chrono::milliseconds(2000));
    CHECK(policy.delay_before_retry(4) == std::chrono::milliseconds(8000));
}

TEST_CASE("429 twice then 200: three attempts with backoff") {
    testing::LocalServer server;
    std::atomic<int> hits{0};
    json last_request;
    std::string auth;
    server.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (++hits <= 2) {
            res.status = 429;
            return;
        }
        last_request = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(chat_reply("The answer is 4.").dump(), "application/json");
    });
    server.start();
    Recorded recorded;
    OpenAiBackend backend(config_for(server), recorded.sleeper());
    CHECK(backend.complete("What is 2+2?", 0.7, 0) == "The answer is 4.");
    CHECK(backend.attempts() == 3);
    CHECK(recorded.sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1),
                                                                      std::chrono::milliseconds(2)});
    CHECK(last_request.at("model") == "tiny");
    CHECK(last_request.at("temperature") == 0.7);
    CHECK(last_request.at("messages").at(0).at("content") == "What is 2+2?");
    CHECK(auth == "Bearer secret");
}

TEST_CASE("server errors exhaust the attempts; auth failures do not retry") {
    testing::LocalServer server;
    std::atomic<int> server_hits{0};
    std::atomic<int> auth_hits{0};
    server.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++server_hits;
        res.status = 503;
    });
    server.server().Post("/auth/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++auth_hits;
        res.status = 401;
    });
    server.server().Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{not json", "application/json");
    });
    server.server().Post("/missing/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 404;
    });
    server.start();
    Recorded recorded;
    auto config = config_for(server);
    OpenAiBackend failing(config, recorded.sleeper());
    try {
        failing.complete("x", 0.0, 0);
        FAIL("expected an error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::ServerError);
    }
    CHECK(server_hits == 5);
    CHECK(recorded.sleeps.size() == 4);

    config.base_url = server.url() + "/auth";
    OpenAiBackend unauthorized(config, recorded.sleeper());
    try {
        unauthorized.complete("x", 0.0, 0);
        FAIL("expected an error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::AuthFailed);
        CHECK_FALSE(e.retryable());
    }
    CHECK(auth_hits == 1);

    config.base_url = server.url() + "/bad";
    OpenAiBackend garbled(config, recorded.sleeper());
    try {
        garbled.complete("x", 0.0, 0);
        FAIL("expected an error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::MalformedReply);
    }

    config.base_url = server.url() + "/missing";
    OpenAiBackend missing(config, recorded.sleeper());
    CHECK_THROWS_AS(missing.complete("x", 0.0, 0), BackendError);
    CHECK(missing.attempts() == 1);
}

TEST_CASE("unreachable host is a network error") {
    OpenAiConfig config;
    config.base_url = "http://127.0.0.1:1";
    config.retry.max_attempts = 2;
    Recorded recorded;
    OpenAiBackend backend(config, recorded.sleeper());
    try {
        backend.complete("x", 0.0, 0);
        FAIL("expected an error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::Network);
    }
    CHECK(backend.attempts() == 2);
}

TEST_CASE("embeddings endpoint") {
    testing::LocalServer server;
    server.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        CHECK(body.at("input") == "hello");
        res.set_content(json{{"data", json::array({{{"embedding", {0.5, -0.25}}}})}}.dump(), "application/json");
    });
    server.start();
    OpenAiBackend backend(config_for(server));
    CHECK(backend.embed("hello") == std::vector<double>{0.5, -0.25});
}

TEST_CASE("the limiter bounds concurrent requests") {
    testing::LocalServer server;
    server.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        res.set_content(chat_reply("ok").dump(), "application/json");
    });
    server.start();
    auto config = config_for(server);
    config.max_in_flight = 2;
    OpenAiBackend backend(config);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 6; ++i) {
        threads.emplace_back([&] { CHECK(backend.complete("x", 0.0, 0) == "ok"); });
    }
    threads.clear();
    CHECK(backend.limiter().peak_in_flight() <= 2);
    CHECK(backend.limiter().in_flight() == 0);
}

TEST_CASE("token bucket spaces requests beyond the burst") {
    RequestLimiter limiter(1, 600.0);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 3; ++i) {
        auto permit = limiter.acquire();
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed >= std::chrono::milliseconds(150));
}

TEST_CASE("configuration from the environment") {
    ::setenv("AP_BACKEND_URL", "http://127.0.0.1:9/v2", 1);
    ::setenv("AP_BACKEND_KEY", "k", 1);
    ::setenv("AP_BACKEND_MODEL", "m", 1);
    ::setenv("AP_EMBED_MODEL", "e", 1);
    const auto config = OpenAiConfig::from_env();
    CHECK(config.base_url == "http://127.0.0.1:9/v2");
    CHECK(config.api_key == "k");
    CHECK(config.model == "m");
    CHECK(config.embedding_model == "e");
    ::unsetenv("AP_BACKEND_URL");
    ::unsetenv("AP_BACKEND_KEY");
    ::unsetenv("AP_BACKEND_MODEL");
    ::unsetenv("AP_EMBED_MODEL");
    CHECK(OpenAiBackend(config).identity() == "openai:http://127.0.0.1:9/v2|m");
}
