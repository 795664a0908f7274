#include "adaprompt/mock_backend.hpp"

#include "adaprompt/hashing.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace adaprompt {

namespace {

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

std::vector<std::string> string_list(const json& j, const char* key) {
    if (!j.contains(key)) {
        return {};
    }
    return j.at(key).get<std::vector<std::string>>();
}

} // namespace

std::unique_ptr<ScriptedMock> ScriptedMock::from_json(const json& fixture) {
    try {
        if (fixture.value("version", 0) != kFormatVersion) {
            throw Error(ErrorCode::SchemaError, "unsupported mock fixture version");
        }
        auto mock = std::make_unique<ScriptedMock>();
        mock->default_response_ = fixture.value("default_response", mock->default_response_);
        mock->embedding_dim_ = fixture.value("embedding_dim", mock->embedding_dim_);
        for (const auto& q : fixture.value("questions", json::array())) {
            mock->add_question(q.at("id").get<std::string>(), q.at("text").get<std::string>(),
                               q.value("cluster", std::string{}));
        }
        for (const auto& r : fixture.value("rules", json::array())) {
            MockRule rule;
            if (r.contains("question_id")) rule.question_id = r.at("question_id").get<std::string>();
            if (r.contains("cluster")) rule.cluster = r.at("cluster").get<std::string>();
            if (r.contains("own_cluster_covered")) rule.own_cluster_covered = r.at("own_cluster_covered").get<bool>();
            if (r.contains("exemplar_count")) rule.exemplar_count = r.at("exemplar_count").get<std::size_t>();
            rule.covered_all = string_list(r, "covered_all");
            rule.covered_none = string_list(r, "covered_none");
            rule.responses = r.at("responses").get<std::vector<std::string>>();
            if (rule.responses.empty()) {
                throw Error(ErrorCode::SchemaError, "mock rule without responses");
            }
            mock->add_rule(std::move(rule));
        }
        for (const auto& e : fixture.value("exact", json::array())) {
            const long long index = e.contains("sample_index") ? e.at("sample_index").get<long long>() : -1;
            mock->exact_[{e.at("prompt_sha256").get<std::string>(), index}] = e.at("response").get<std::string>();
        }
        for (const auto& e : fixture.value("embeddings", json::array())) {
            mock->set_embedding(e.at("text").get<std::string>(), e.at("vector").get<std::vector<double>>());
        }
        return mock;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("malformed mock fixture: ") + e.what());
    }
}

std::unique_ptr<ScriptedMock> ScriptedMock::load(const std::filesystem::path& path) {
    json fixture;
    try {
        fixture = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, "mock fixture '" + path.string() + "' is not JSON: " + e.what());
    } catch (const std::system_error&) {
        throw Error(ErrorCode::SchemaError, "cannot read mock fixture '" + path.string() + "'");
    }
    return from_json(fixture);
}

void ScriptedMock::add_question(const std::string& id, const std::string& text, const std::string& cluster) {
    by_first_line_[first_line(text)] = {id, cluster};
    invalidate_identity();
    cluster_of_[id] = cluster;
    question_order_.emplace_back(id, text);
}

void ScriptedMock::add_rule(MockRule rule) {
    rules_.push_back(std::move(rule));
    invalidate_identity();
}

void ScriptedMock::add_exact(const std::string& prompt, std::optional<std::size_t> sample_index,
                             const std::string& response) {
    const long long index = sample_index ? static_cast<long long>(*sample_index) : -1;
    exact_[{sha256_hex(prompt), index}] = response;
    invalidate_identity();
}

void ScriptedMock::set_embedding(const std::string& text, std::vector<double> vector) {
    embeddings_[text] = std::move(vector);
    invalidate_identity();
}

ScriptedMock::PromptView ScriptedMock::read_prompt(const std::string& prompt) const {
    PromptView view;
    std::vector<std::string> asked;
    std::istringstream lines(prompt);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("Q: ", 0) == 0) {
            asked.push_back(line.substr(3));
        }
    }
    for (std::size_t i = 0; i < asked.size(); ++i) {
        auto it = by_first_line_.find(asked[i]);
        const bool last = i + 1 == asked.size();
        if (last) {
            if (it != by_first_line_.end()) view.asked_id = it->second.id;
        } else if (it != by_first_line_.end()) {
            view.exemplar_ids.push_back(it->second.id);
            if (!it->second.cluster.empty()) view.covered_clusters.insert(it->second.cluster);
        }
    }
    return view;
}

std::string ScriptedMock::lookup(const std::string& prompt, std::size_t sample_index) const {
    if (!exact_.empty()) {
        const auto hash = sha256_hex(prompt);
        if (auto it = exact_.find({hash, static_cast<long long>(sample_index)}); it != exact_.end()) {
            return it->second;
        }
        if (auto it = exact_.find({hash, -1}); it != exact_.end()) {
            return it->second;
        }
    }
    const auto view = read_prompt(prompt);
    if (!view.asked_id) {
        return default_response_;
    }
    const auto& cluster = cluster_of_.at(*view.asked_id);
    const auto covered = [&](const std::string& c) { return view.covered_clusters.count(c) > 0; };
    for (const auto& rule : rules_) {
        if (rule.question_id && *rule.question_id != *view.asked_id) continue;
        if (rule.cluster && *rule.cluster != cluster) continue;
        if (rule.own_cluster_covered && *rule.own_cluster_covered != (!cluster.empty() && covered(cluster))) continue;
        if (!std::all_of(rule.covered_all.begin(), rule.covered_all.end(), covered)) continue;
        if (std::any_of(rule.covered_none.begin(), rule.covered_none.end(), covered)) continue;
        if (rule.exemplar_count && *rule.exemplar_count != view.exemplar_ids.size()) continue;
        return rule.responses[sample_index % rule.responses.size()];
    }
    return default_response_;
}

std::string ScriptedMock::complete(const std::string& prompt, double /*temperature*/, std::size_t sample_index) {
    ++completion_calls_;
    return lookup(prompt, sample_index);
}

std::vector<double> ScriptedMock::embed(const std::string& text) {
    ++embedding_calls_;
    if (auto it = embeddings_.find(text); it != embeddings_.end()) {
        return it->second;
    }
    std::vector<double> vector(std::max<std::size_t>(1, embedding_dim_), 0.0);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const auto h = fnv1a64(word);
        vector[h % vector.size()] += ((h >> 32) & 1U) != 0 ? -1.0 : 1.0;
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    if (std::all_of(vector.begin(), vector.end(), [](double v) { return v == 0.0; })) {
        vector[fnv1a64(text) % vector.size()] = 1.0;
    }
    return vector;
}

json ScriptedMock::to_json() const {
    json questions = json::array();
    for (const auto& [id, text] : question_order_) {
        questions.push_back({{"id", id}, {"text", text}, {"cluster", cluster_of_.at(id)}});
    }
    json rules = json::array();
    for (const auto& rule : rules_) {
        json r;
        if (rule.question_id) r["question_id"] = *rule.question_id;
        if (rule.cluster) r["cluster"] = *rule.cluster;
        if (rule.own_cluster_covered) r["own_cluster_covered"] = *rule.own_cluster_covered;
        if (!rule.covered_all.empty()) r["covered_all"] = rule.covered_all;
        if (!rule.covered_none.empty()) r["covered_none"] = rule.covered_none;
        if (rule.exemplar_count) r["exemplar_count"] = *rule.exemplar_count;
        r["responses"] = rule.responses;
        rules.push_back(std::move(r));
    }
    json exact = json::array();
    for (const auto& [key, response] : exact_) {
        json e{{"prompt_sha256", key.first}, {"response", response}};
        if (key.second >= 0) e["sample_index"] = key.second;
        exact.push_back(std::move(e));
    }
    json embeddings = json::array();
    for (const auto& [text, vector] : embeddings_) {
        embeddings.push_back({{"text", text}, {"vector", vector}});
    }
    return {
        {"version", kFormatVersion},
        {"default_response", default_response_},
        {"embedding_dim", embedding_dim_},
        {"questions", std::move(questions)},
        {"rules", std::move(rules)},
        {"exact", std::move(exact)},
        {"embeddings", std::move(embeddings)},
    };
}

std::string ScriptedMock::identity() const {
    std::lock_guard lock(identity_mutex_);
    if (identity_.empty()) {
        identity_ = "mock:" + sha256_hex(to_json().dump()).substr(0, 16);
    }
    return identity_;
}

void ScriptedMock::invalidate_identity() {
    std::lock_guard lock(identity_mutex_);
    identity_.clear();
}

void ScriptedMock::set_default_response(std::string response) {
    default_response_ = std::move(response);
    invalidate_identity();
}

void ScriptedMock::set_embedding_dim(std::size_t dim) {
    embedding_dim_ = dim;
    invalidate_identity();
}

void ScriptedMock::reset_counters() {
    completion_calls_ = 0;
    embedding_calls_ = 0;
}

} // namespace adaprompt
