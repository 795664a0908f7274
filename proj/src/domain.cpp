#include "adaprompt/domain.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/hashing.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <unordered_set>
#include <utility>

namespace adaprompt {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void append_exemplars(std::string& out, const ExemplarSet& exemplars) {
    for (const auto& exemplar : exemplars.exemplars) {
        out += render_question_block(exemplar.question);
        out += "A: ";
        out += exemplar.rationale;
        if (exemplar.answer.valid) {
            out += ' ';
            out += kAnswerAnchor;
            out += ' ';
            out += exemplar.answer.canonical;
            out += '.';
        }
        out += "\n\n";
    }
}

} // namespace

std::string_view to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::Numeric: return "numeric";
    case TaskKind::MultipleChoice: return "multiple_choice";
    case TaskKind::Boolean: return "boolean";
    case TaskKind::StringConcat: return "string_concat";
    }
    return "numeric";
}

std::optional<TaskKind> task_kind_from_string(std::string_view text) {
    const auto key = lower(text);
    if (key == "numeric") return TaskKind::Numeric;
    if (key == "multiple_choice") return TaskKind::MultipleChoice;
    if (key == "boolean") return TaskKind::Boolean;
    if (key == "string_concat") return TaskKind::StringConcat;
    return std::nullopt;
}

void validate_question(const Question& question) {
    if (question.id.empty()) {
        throw Error(ErrorCode::SchemaError, "question id must be non-empty");
    }
    const bool is_choice = question.kind == TaskKind::MultipleChoice;
    if (is_choice && question.choices.empty()) {
        throw Error(ErrorCode::SchemaError, "multiple-choice question '" + question.id + "' has no choices");
    }
    if (!is_choice && !question.choices.empty()) {
        throw Error(ErrorCode::SchemaError, "question '" + question.id + "' has choices but is not multiple-choice");
    }
    if (question.choices.size() > 26) {
        throw Error(ErrorCode::SchemaError, "question '" + question.id + "' has too many choices");
    }
    for (std::size_t i = 0; i < question.choices.size(); ++i) {
        const std::string expected(1, static_cast<char>('A' + i));
        if (question.choices[i].label != expected) {
            throw Error(ErrorCode::SchemaError,
                        "question '" + question.id + "' choice labels must run consecutively from A");
        }
    }
    if (question.gold && question.gold->kind != question.kind) {
        throw Error(ErrorCode::SchemaError, "question '" + question.id + "' gold answer kind mismatch");
    }
}

bool ExemplarSet::contains(std::string_view question_id) const {
    return std::any_of(exemplars.begin(), exemplars.end(),
                       [&](const Exemplar& e) { return e.question.id == question_id; });
}

void ExemplarSet::add(Exemplar exemplar) {
    if (exemplars.size() >= budget_k) {
        throw Error(ErrorCode::InvalidState, "exemplar budget k=" + std::to_string(budget_k) + " exhausted");
    }
    if (contains(exemplar.question.id)) {
        throw Error(ErrorCode::InvalidAnnotation, "question '" + exemplar.question.id + "' already annotated");
    }
    if (exemplar.rationale.empty()) {
        throw Error(ErrorCode::InvalidAnnotation, "rationale must be non-empty");
    }
    if (!exemplar.answer.valid && !exemplar.provenance.flagged) {
        throw Error(ErrorCode::InvalidAnnotation, "answer must be a valid normalized answer");
    }
    exemplars.push_back(std::move(exemplar));
}

std::string exemplar_set_hash(const ExemplarSet& exemplars) {
    std::string rendered;
    append_exemplars(rendered, exemplars);
    return sha256_hex(rendered);
}

const Question* QuestionPool::find(std::string_view id) const {
    auto it = std::find_if(questions.begin(), questions.end(), [&](const Question& q) { return q.id == id; });
    return it == questions.end() ? nullptr : &*it;
}

void validate_pool(const QuestionPool& pool) {
    std::unordered_set<std::string> seen;
    for (const auto& question : pool.questions) {
        validate_question(question);
        if (!seen.insert(question.id).second) {
            throw Error(ErrorCode::SchemaError, "duplicate question id '" + question.id + "'");
        }
        if (pool.role == PoolRole::Test && !question.gold) {
            throw Error(ErrorCode::SchemaError, "test question '" + question.id + "' has no gold answer");
        }
    }
}

std::string_view to_string(Metric metric) {
    return metric == Metric::Disagreement ? "disagreement" : "entropy";
}

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::Adaptive: return "adaptive";
    case Strategy::Active: return "active";
    case Strategy::Random: return "random";
    case Strategy::AutoCoT: return "auto_cot";
    case Strategy::Fixed: return "fixed";
    }
    return "adaptive";
}

std::optional<Metric> metric_from_string(std::string_view text) {
    const auto key = lower(text);
    if (key == "disagreement" || key == "d") return Metric::Disagreement;
    if (key == "entropy" || key == "e") return Metric::Entropy;
    return std::nullopt;
}

std::optional<Strategy> strategy_from_string(std::string_view text) {
    const auto key = lower(text);
    if (key == "adaptive") return Strategy::Adaptive;
    if (key == "active") return Strategy::Active;
    if (key == "random") return Strategy::Random;
    if (key == "auto_cot" || key == "autocot" || key == "auto-cot") return Strategy::AutoCoT;
    if (key == "fixed") return Strategy::Fixed;
    return std::nullopt;
}

SessionConfig SessionConfig::for_budget(std::size_t k) {
    SessionConfig config;
    config.budget_k = k;
    config.samples_l = 10;
    config.pool_cap_s = 50 * k;
    return config;
}

void validate_config(const SessionConfig& config) {
    if (config.budget_k < 1) {
        throw Error(ErrorCode::InvalidConfig, "budget_k must be >= 1");
    }
    if (config.samples_l < 1) {
        throw Error(ErrorCode::InvalidConfig, "samples_l must be >= 1");
    }
    if (config.pool_cap_s < config.budget_k) {
        throw Error(ErrorCode::InvalidConfig, "pool_cap_s must be >= budget_k");
    }
    if (!(config.sampling_temperature >= 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "sampling_temperature must be non-negative");
    }
    if (config.max_in_flight < 1) {
        throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
    }
}

std::optional<std::size_t> preset_budget(std::string_view dataset_name) {
    static constexpr std::array<std::pair<std::string_view, std::size_t>, 6> kPresets{{
        {"aqua", 4},
        {"letter_concat", 4},
        {"strategyqa", 6},
        {"csqa", 7},
        {"gsm8k", 8},
        {"svamp", 8},
    }};
    const auto key = lower(dataset_name);
    for (const auto& [name, k] : kPresets) {
        if (key == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::string render_question_block(const Question& question) {
    std::string out = "Q: ";
    out += question.text;
    out += '\n';
    if (question.kind == TaskKind::MultipleChoice) {
        out += "Answer Choices:";
        for (const auto& choice : question.choices) {
            out += " (";
            out += choice.label;
            out += ") ";
            out += choice.text;
        }
        out += '\n';
    }
    return out;
}

std::string render_prompt(const ExemplarSet& exemplars, const Question& question) {
    std::string out;
    append_exemplars(out, exemplars);
    out += render_question_block(question);
    out += "A:";
    if (exemplars.empty()) {
        out += ' ';
        out += kZeroShotTrigger;
    }
    return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

QuestionPool subsample_pool(const QuestionPool& pool, std::size_t cap, std::uint64_t seed) {
    if (pool.questions.empty()) {
        throw Error(ErrorCode::EmptyPool, "cannot subsample an empty pool");
    }
    if (cap < 1) {
        throw Error(ErrorCode::InvalidConfig, "pool cap must be >= 1");
    }
    if (pool.size() <= cap) {
        return pool;
    }
    auto order = seeded_permutation(pool.size(), seed);
    order.resize(cap);
    std::sort(order.begin(), order.end());
    QuestionPool out;
    out.role = pool.role;
    out.questions.reserve(cap);
    for (auto index : order) {
        out.questions.push_back(pool.questions[index]);
    }
    return out;
}

} // namespace adaprompt
