#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adaprompt {

enum class TaskKind { Numeric, MultipleChoice, Boolean, StringConcat };

std::string_view to_string(TaskKind kind);
/// Accepts "numeric", "multiple_choice", "boolean", "string_concat".
std::optional<TaskKind> task_kind_from_string(std::string_view text);

/// A final answer after per-kind normalization. All invalid answers of a kind
/// share one sentinel bucket, so equality is plain field equality.
struct NormalizedAnswer {
    TaskKind kind = TaskKind::Numeric;
    std::string canonical;
    bool valid = false;

    static NormalizedAnswer invalid(TaskKind kind) { return {kind, {}, false}; }
    static NormalizedAnswer of(TaskKind kind, std::string canonical) { return {kind, std::move(canonical), true}; }

    friend bool operator==(const NormalizedAnswer&, const NormalizedAnswer&) = default;
    friend auto operator<=>(const NormalizedAnswer&, const NormalizedAnswer&) = default;
};

struct Choice {
    std::string label;
    std::string text;

    friend bool operator==(const Choice&, const Choice&) = default;
};

struct Question {
    std::string id;
    std::string text;
    TaskKind kind = TaskKind::Numeric;
    std::vector<Choice> choices;
    std::optional<NormalizedAnswer> gold;

    friend bool operator==(const Question&, const Question&) = default;
};

/// Throws Error(SchemaError) unless choices are present exactly for
/// MultipleChoice and labeled consecutively from "A".
void validate_question(const Question& question);

struct SelectionScores {
    double disagreement = 0.0;
    double entropy = 0.0;

    friend bool operator==(const SelectionScores&, const SelectionScores&) = default;
};

struct Provenance {
    int round = 1;
    std::string strategy;
    std::optional<SelectionScores> scores_at_selection;
    std::string annotator_id;
    /// Set when an automatically generated rationale had no extractable answer.
    bool flagged = false;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Exemplar {
    Question question;
    std::string rationale;
    NormalizedAnswer answer;
    Provenance provenance;

    friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

struct ExemplarSet {
    std::vector<Exemplar> exemplars;
    std::size_t budget_k = 0;

    [[nodiscard]] bool empty() const noexcept { return exemplars.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return exemplars.size(); }
    [[nodiscard]] bool contains(std::string_view question_id) const;

    /// Appends after checking budget, id uniqueness and rationale/answer validity.
    void add(Exemplar exemplar);

    friend bool operator==(const ExemplarSet&, const ExemplarSet&) = default;
};

/// Stable digest of the exemplar content that influences prompts.
std::string exemplar_set_hash(const ExemplarSet& exemplars);

enum class PoolRole { Train, Test };

struct QuestionPool {
    std::vector<Question> questions;
    PoolRole role = PoolRole::Train;

    [[nodiscard]] std::size_t size() const noexcept { return questions.size(); }
    [[nodiscard]] const Question* find(std::string_view id) const;

    friend bool operator==(const QuestionPool&, const QuestionPool&) = default;
};

/// Throws Error(SchemaError) on duplicate ids, malformed questions, or a test
/// pool question without a gold answer.
void validate_pool(const QuestionPool& pool);

enum class Metric { Disagreement, Entropy };
enum class Strategy { Adaptive, Active, Random, AutoCoT, Fixed };

std::string_view to_string(Metric metric);
std::string_view to_string(Strategy strategy);
std::optional<Metric> metric_from_string(std::string_view text);
std::optional<Strategy> strategy_from_string(std::string_view text);

struct SessionConfig {
    std::size_t budget_k = 1;
    std::size_t samples_l = 10;
    std::size_t pool_cap_s = 50;
    Metric metric = Metric::Entropy;
    Strategy strategy = Strategy::Adaptive;
    std::uint64_t seed = 0;
    double sampling_temperature = 0.7;
    std::size_t max_in_flight = 4;

    /// Config with the usual defaults for budget k: l = 10, s = 50 * k.
    static SessionConfig for_budget(std::size_t k);

    friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

/// Throws Error(InvalidConfig) when k < 1, l < 1, s < k, temperature < 0 or max_in_flight < 1.
void validate_config(const SessionConfig& config);

/// Default exemplar budget for the benchmark datasets (gsm8k, svamp, aqua,
/// strategyqa, csqa, letter_concat), matched case-insensitively.
std::optional<std::size_t> preset_budget(std::string_view dataset_name);

inline constexpr std::string_view kAnswerAnchor = "The answer is";
inline constexpr std::string_view kZeroShotTrigger = "Let's think step by step.";

/// Renders the exemplars followed by the question. With no exemplars the
/// answer line carries the zero-shot trigger.
std::string render_prompt(const ExemplarSet& exemplars, const Question& question);

/// Renders a single question block without the trailing "A:" line.
std::string render_question_block(const Question& question);

/// Returns the pool untouched when it holds at most `cap` questions, otherwise
/// a seeded uniform draw of `cap` questions kept in their original order.
QuestionPool subsample_pool(const QuestionPool& pool, std::size_t cap, std::uint64_t seed);

/// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

} // namespace adaprompt
