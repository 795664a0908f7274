#include "adaprompt/json_io.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/parsing.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace adaprompt {

namespace {

[[noreturn]] void schema_error(const std::string& message) {
    throw Error(ErrorCode::SchemaError, message);
}

const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        schema_error(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

std::string require_string(const json& j, const char* key) {
    const auto& value = require(j, key);
    if (!value.is_string()) {
        schema_error(std::string("field '") + key + "' must be a string");
    }
    return value.get<std::string>();
}

std::string scalar_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    if (value.is_number()) return value.dump();
    if (value.is_boolean()) return value.get<bool>() ? "yes" : "no";
    schema_error("answer must be a string, number or boolean");
}

} // namespace

json question_to_json(const Question& question) {
    json j;
    j["id"] = question.id;
    j["question"] = question.text;
    j["kind"] = std::string(to_string(question.kind));
    if (!question.choices.empty()) {
        json choices = json::array();
        for (const auto& choice : question.choices) {
            choices.push_back(choice.text);
        }
        j["choices"] = std::move(choices);
    }
    if (question.gold) {
        j["answer"] = question.gold->valid ? json(question.gold->canonical) : json(nullptr);
    }
    return j;
}

Question question_from_json(const json& j) {
    try {
        Question q;
        q.id = require_string(j, "id");
        q.text = require_string(j, "question");
        const auto kind = task_kind_from_string(require_string(j, "kind"));
        if (!kind) {
            schema_error("unknown kind '" + j.at("kind").get<std::string>() + "'");
        }
        q.kind = *kind;
        if (j.contains("choices") && !j.at("choices").is_null()) {
            const auto& choices = j.at("choices");
            if (!choices.is_array()) {
                schema_error("choices must be an array");
            }
            for (std::size_t i = 0; i < choices.size(); ++i) {
                const auto& c = choices[i];
                if (c.is_string()) {
                    q.choices.push_back({std::string(1, static_cast<char>('A' + i)), c.get<std::string>()});
                } else {
                    q.choices.push_back({require_string(c, "label"), require_string(c, "text")});
                }
            }
        }
        if (j.contains("answer") && !j.at("answer").is_null()) {
            auto gold = normalize_answer_text(scalar_text(j.at("answer")), q);
            if (!gold.valid) {
                schema_error("answer of question '" + q.id + "' does not normalize");
            }
            q.gold = std::move(gold);
        }
        validate_question(q);
        return q;
    } catch (const json::exception& e) {
        schema_error(std::string("malformed question: ") + e.what());
    }
}

json answer_to_json(const NormalizedAnswer& answer) {
    return answer.valid ? json(answer.canonical) : json(nullptr);
}

NormalizedAnswer answer_from_json(const json& j, const Question& question) {
    if (j.is_null()) {
        return NormalizedAnswer::invalid(question.kind);
    }
    return normalize_answer_text(scalar_text(j), question);
}

json scores_to_json(const SelectionScores& scores) {
    return {{"disagreement", scores.disagreement}, {"entropy", scores.entropy}};
}

SelectionScores scores_from_json(const json& j) {
    try {
        return {j.at("disagreement").get<double>(), j.at("entropy").get<double>()};
    } catch (const json::exception& e) {
        schema_error(std::string("malformed scores: ") + e.what());
    }
}

json exemplar_to_json(const Exemplar& exemplar) {
    json provenance;
    provenance["round"] = exemplar.provenance.round;
    provenance["strategy"] = exemplar.provenance.strategy;
    provenance["scores_at_selection"] = exemplar.provenance.scores_at_selection
                                            ? scores_to_json(*exemplar.provenance.scores_at_selection)
                                            : json(nullptr);
    provenance["annotator_id"] = exemplar.provenance.annotator_id;
    if (exemplar.provenance.flagged) {
        provenance["flagged"] = true;
    }
    return {
        {"question", question_to_json(exemplar.question)},
        {"rationale", exemplar.rationale},
        {"answer", answer_to_json(exemplar.answer)},
        {"provenance", std::move(provenance)},
    };
}

Exemplar exemplar_from_json(const json& j) {
    try {
        Exemplar e;
        e.question = question_from_json(require(j, "question"));
        e.rationale = require_string(j, "rationale");
        e.answer = answer_from_json(require(j, "answer"), e.question);
        const auto& p = require(j, "provenance");
        e.provenance.round = require(p, "round").get<int>();
        e.provenance.strategy = require_string(p, "strategy");
        if (p.contains("scores_at_selection") && !p.at("scores_at_selection").is_null()) {
            e.provenance.scores_at_selection = scores_from_json(p.at("scores_at_selection"));
        }
        e.provenance.annotator_id = p.value("annotator_id", std::string{});
        e.provenance.flagged = p.value("flagged", false);
        if (e.rationale.empty()) {
            schema_error("exemplar '" + e.question.id + "' has an empty rationale");
        }
        if (!e.answer.valid && !e.provenance.flagged) {
            schema_error("exemplar '" + e.question.id + "' has no valid answer");
        }
        return e;
    } catch (const json::exception& e) {
        schema_error(std::string("malformed exemplar: ") + e.what());
    }
}

json config_to_json(const SessionConfig& config) {
    return {
        {"budget_k", config.budget_k},
        {"samples_l", config.samples_l},
        {"pool_cap_s", config.pool_cap_s},
        {"metric", std::string(to_string(config.metric))},
        {"strategy", std::string(to_string(config.strategy))},
        {"seed", config.seed},
        {"sampling_temperature", config.sampling_temperature},
        {"max_in_flight", config.max_in_flight},
    };
}

SessionConfig config_from_json(const json& j, SessionConfig base) {
    if (!j.is_object()) {
        schema_error("config must be an object");
    }
    try {
        const bool cap_given = j.contains("pool_cap_s");
        if (j.contains("budget_k")) {
            base.budget_k = j.at("budget_k").get<std::size_t>();
            if (!cap_given) base.pool_cap_s = 50 * base.budget_k;
        }
        if (j.contains("samples_l")) base.samples_l = j.at("samples_l").get<std::size_t>();
        if (cap_given) base.pool_cap_s = j.at("pool_cap_s").get<std::size_t>();
        if (j.contains("metric")) {
            auto metric = metric_from_string(j.at("metric").get<std::string>());
            if (!metric) schema_error("unknown metric");
            base.metric = *metric;
        }
        if (j.contains("strategy")) {
            auto strategy = strategy_from_string(j.at("strategy").get<std::string>());
            if (!strategy) schema_error("unknown strategy");
            base.strategy = *strategy;
        }
        if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("sampling_temperature")) base.sampling_temperature = j.at("sampling_temperature").get<double>();
        if (j.contains("max_in_flight")) base.max_in_flight = j.at("max_in_flight").get<std::size_t>();
        return base;
    } catch (const json::exception& e) {
        schema_error(std::string("malformed config: ") + e.what());
    }
}

std::string dump_exemplar_file(const ExemplarFile& file) {
    json exemplars = json::array();
    for (const auto& e : file.exemplars.exemplars) {
        exemplars.push_back(exemplar_to_json(e));
    }
    json j{
        {"version", kFormatVersion},
        {"dataset", file.dataset},
        {"strategy", file.strategy},
        {"budget_k", file.exemplars.budget_k},
        {"exemplars", std::move(exemplars)},
    };
    return j.dump(2) + "\n";
}

ExemplarFile parse_exemplar_file(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        schema_error(std::string("exemplar file is not JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("version", 0) != kFormatVersion) {
        schema_error("unsupported exemplar file version");
    }
    ExemplarFile file;
    file.dataset = j.value("dataset", std::string{});
    file.strategy = j.value("strategy", std::string{});
    const auto& list = require(j, "exemplars");
    if (!list.is_array()) {
        schema_error("exemplars must be an array");
    }
    file.exemplars.budget_k = j.contains("budget_k") ? j.at("budget_k").get<std::size_t>() : list.size();
    if (file.exemplars.budget_k < list.size()) {
        schema_error("exemplar count exceeds budget_k");
    }
    for (const auto& item : list) {
        auto exemplar = exemplar_from_json(item);
        if (file.exemplars.contains(exemplar.question.id)) {
            schema_error("duplicate exemplar question '" + exemplar.question.id + "'");
        }
        file.exemplars.exemplars.push_back(std::move(exemplar));
    }
    return file;
}

ExemplarFile load_exemplar_file(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) {
        schema_error("exemplar file '" + path.string() + "' does not exist");
    }
    return parse_exemplar_file(read_file(path));
}

void save_exemplar_file(const std::filesystem::path& path, const ExemplarFile& file) {
    write_file_atomic(path, dump_exemplar_file(file));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto temp = path;
    static std::atomic<unsigned long> counter{0};
    temp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::system_error(errno, std::generic_category(), "cannot write " + temp.string());
        }
        out << contents;
        out.flush();
        if (!out) {
            throw std::system_error(errno, std::generic_category(), "short write to " + temp.string());
        }
    }
    std::filesystem::rename(temp, path);
}

} // namespace adaprompt
