#pragma once

#include "adaprompt/backend.hpp"
#include "adaprompt/cache.hpp"
#include "adaprompt/domain.hpp"
#include "adaprompt/json_io.hpp"
#include "adaprompt/uncertainty.hpp"

#include <span>
#include <string>
#include <vector>

namespace adaprompt {

struct EvalConfig {
    std::size_t votes_per_question = 6;
    std::size_t runs = 3;
    double temperature = 0.7;
    std::size_t max_in_flight = 4;
};

/// Throws Error(InvalidConfig) unless votes, runs and max_in_flight are positive.
void validate_eval_config(const EvalConfig& config);

/// Modal answer; ties go to the answer seen first. The invalid sentinel wins
/// only when no vote is valid. Throws Error(EmptySample) on no votes.
NormalizedAnswer self_consistency_answer(std::span<const NormalizedAnswer> votes);

struct QuestionResult {
    std::string question_id;
    AnswerDistribution votes;
    NormalizedAnswer chosen;
    NormalizedAnswer gold;
    bool correct = false;
};

struct RunResult {
    /// Sorted by question id.
    std::vector<QuestionResult> per_question;
    double accuracy = 0.0;
};

struct EvalResult {
    std::vector<RunResult> runs;
    std::vector<double> run_accuracies;
    double mean_accuracy = 0.0;
};

/// One self-consistency pass over the test pool. Run r draws sample indices
/// r * votes .. r * votes + votes - 1, so repeated runs over the same
/// exemplars see fresh samples while staying cacheable.
RunResult evaluate_run(const ExemplarSet& exemplars, const QuestionPool& test_pool, ModelBackend& backend,
                       const EvalConfig& config, ResponseCache& cache, std::size_t run_index);

/// config.runs passes over one exemplar set.
EvalResult evaluate(const ExemplarSet& exemplars, const QuestionPool& test_pool, ModelBackend& backend,
                    const EvalConfig& config, ResponseCache& cache);

/// Collects per-run results (for example one per independently selected
/// exemplar set) into run accuracies and their mean.
EvalResult aggregate(std::vector<RunResult> runs);

json eval_result_to_json(const EvalResult& result);
/// Header "run,question_id,chosen,gold,correct"; invalid answers are empty cells.
std::string eval_result_csv(const EvalResult& result);

} // namespace adaprompt
