#pragma once

#include "adaprompt/backend.hpp"
#include "adaprompt/json_io.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace adaprompt {

/// Response rule for the scripted mock. Every set field must hold for the
/// rule to apply; the first applicable rule in insertion order wins.
struct MockRule {
    std::optional<std::string> question_id;
    std::optional<std::string> cluster;
    /// Whether any exemplar in the prompt shares the asked question's cluster.
    std::optional<bool> own_cluster_covered;
    std::vector<std::string> covered_all;
    std::vector<std::string> covered_none;
    std::optional<std::size_t> exemplar_count;
    /// Sample i answers responses[i % size].
    std::vector<std::string> responses;
};

/// Deterministic fake model driven by a fixture.
///
/// Prompts are read back into (asked question, exemplar questions) by their
/// "Q: " lines; the first line of each question's text identifies it through
/// the registered question table. Lookup order: exact prompt hash with
/// sample index, exact prompt hash for any index, rules, default response.
///
/// Embeddings come from the fixture's table when the text is listed there,
/// otherwise from feature hashing: every lowercase alphanumeric word w adds
/// +1 or -1 (bit 32 of fnv1a64(w)) at index fnv1a64(w) mod dim.
///
/// Fixture schema (version 1):
///   {"version": 1, "default_response": str, "embedding_dim": int,
///    "questions": [{"id", "text", "cluster"}],
///    "rules": [{"question_id"?, "cluster"?, "own_cluster_covered"?,
///               "covered_all"?, "covered_none"?, "exemplar_count"?, "responses"}],
///    "exact": [{"prompt_sha256", "sample_index"?, "response"}],
///    "embeddings": [{"text", "vector"}]}
class ScriptedMock : public ModelBackend, public EmbeddingBackend {
public:
    ScriptedMock() = default;
    ScriptedMock(const ScriptedMock&) = delete;
    ScriptedMock& operator=(const ScriptedMock&) = delete;

    static std::unique_ptr<ScriptedMock> from_json(const json& fixture);
    static std::unique_ptr<ScriptedMock> load(const std::filesystem::path& path);

    void add_question(const std::string& id, const std::string& text, const std::string& cluster);
    void add_rule(MockRule rule);
    void add_exact(const std::string& prompt, std::optional<std::size_t> sample_index, const std::string& response);
    void set_default_response(std::string response);
    void set_embedding(const std::string& text, std::vector<double> vector);
    void set_embedding_dim(std::size_t dim);

    std::string complete(const std::string& prompt, double temperature, std::size_t sample_index) override;
    std::vector<double> embed(const std::string& text) override;
    [[nodiscard]] std::string identity() const override;

    [[nodiscard]] std::size_t completion_calls() const { return completion_calls_.load(); }
    [[nodiscard]] std::size_t embedding_calls() const { return embedding_calls_.load(); }
    void reset_counters();

    /// Pure lookup without touching the call counters.
    [[nodiscard]] std::string lookup(const std::string& prompt, std::size_t sample_index) const;

    [[nodiscard]] json to_json() const;

    struct PromptView {
        std::optional<std::string> asked_id;
        std::vector<std::string> exemplar_ids;
        std::set<std::string> covered_clusters;
    };
    [[nodiscard]] PromptView read_prompt(const std::string& prompt) const;

private:
    void invalidate_identity();

    struct Entry {
        std::string id;
        std::string cluster;
    };

    std::map<std::string, Entry> by_first_line_;
    std::map<std::string, std::string> cluster_of_;
    std::vector<std::pair<std::string, std::string>> question_order_;
    std::vector<MockRule> rules_;
    std::map<std::pair<std::string, long long>, std::string> exact_;
    std::map<std::string, std::vector<double>> embeddings_;
    std::string default_response_ = "I am not sure.";
    std::size_t embedding_dim_ = 16;
    mutable std::mutex identity_mutex_;
    mutable std::string identity_;
    std::atomic<std::size_t> completion_calls_{0};
    std::atomic<std::size_t> embedding_calls_{0};
};

} // namespace adaprompt
