#pragma once

#include "adaprompt/backend.hpp"
#include "adaprompt/cache.hpp"
#include "adaprompt/domain.hpp"
#include "adaprompt/json_io.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adaprompt {

/// Unique answers with their counts, in order of first appearance.
struct AnswerDistribution {
    std::vector<std::pair<NormalizedAnswer, std::size_t>> counts;
    std::size_t total = 0;

    [[nodiscard]] std::size_t unique() const noexcept { return counts.size(); }
    [[nodiscard]] std::size_t count_of(const NormalizedAnswer& answer) const;

    friend bool operator==(const AnswerDistribution&, const AnswerDistribution&) = default;
};

/// Throws Error(EmptySample) on an empty list.
AnswerDistribution distribution_from_samples(std::span<const NormalizedAnswer> answers);

/// t / l: distinct answers over samples.
double disagreement_score(const AnswerDistribution& distribution);

/// -sum p ln p with p = count / l, in nats.
double entropy_score(const AnswerDistribution& distribution);

struct SampledAnswer {
    std::string raw;
    NormalizedAnswer answer;

    friend bool operator==(const SampledAnswer&, const SampledAnswer&) = default;
};

struct UncertaintyReport {
    std::string question_id;
    std::string exemplar_set_hash;
    std::vector<SampledAnswer> samples;
    AnswerDistribution distribution;
    double disagreement = 0.0;
    double entropy = 0.0;

    [[nodiscard]] double score(Metric metric) const {
        return metric == Metric::Disagreement ? disagreement : entropy;
    }
    [[nodiscard]] SelectionScores scores() const { return {disagreement, entropy}; }

    friend bool operator==(const UncertaintyReport&, const UncertaintyReport&) = default;
};

/// Builds the report from already collected raw completions.
UncertaintyReport report_from_samples(const std::string& question_id, const std::string& exemplar_hash,
                                      std::vector<SampledAnswer> samples);

/// Samples l completions of the prompt for (exemplars, question) through the
/// cache and scores them. Every fetched sample is cached before any error
/// propagates.
UncertaintyReport score_question(ModelBackend& backend, const ExemplarSet& exemplars, const Question& question,
                                 const SessionConfig& config, ResponseCache& cache);

/// Scores every question concurrently (at most config.max_in_flight at once).
/// Output order matches `questions`.
std::vector<UncertaintyReport> score_questions(ModelBackend& backend, const ExemplarSet& exemplars,
                                               std::span<const Question> questions, const SessionConfig& config,
                                               ResponseCache& cache);

json report_to_json(const UncertaintyReport& report);
UncertaintyReport report_from_json(const json& j, const Question& question);

json distribution_to_json(const AnswerDistribution& distribution);

} // namespace adaprompt
