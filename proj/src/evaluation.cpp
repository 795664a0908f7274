#include "adaprompt/evaluation.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/parallel.hpp"
#include "adaprompt/parsing.hpp"

#include <algorithm>
#include <numeric>

namespace adaprompt {

void validate_eval_config(const EvalConfig& config) {
    if (config.votes_per_question < 1) {
        throw Error(ErrorCode::InvalidConfig, "votes per question must be >= 1");
    }
    if (config.runs < 1) {
        throw Error(ErrorCode::InvalidConfig, "runs must be >= 1");
    }
    if (config.max_in_flight < 1) {
        throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
    }
    if (!(config.temperature >= 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
    }
}

NormalizedAnswer self_consistency_answer(std::span<const NormalizedAnswer> votes) {
    const auto distribution = distribution_from_samples(votes);
    const std::pair<NormalizedAnswer, std::size_t>* best = nullptr;
    for (const auto& entry : distribution.counts) {
        if (!entry.first.valid) continue;
        if (best == nullptr || entry.second > best->second) best = &entry;
    }
    return best != nullptr ? best->first : distribution.counts.front().first;
}

RunResult evaluate_run(const ExemplarSet& exemplars, const QuestionPool& test_pool, ModelBackend& backend,
                       const EvalConfig& config, ResponseCache& cache, std::size_t run_index) {
    validate_eval_config(config);
    if (test_pool.questions.empty()) {
        throw Error(ErrorCode::EmptyPool, "test pool is empty");
    }
    for (const auto& q : test_pool.questions) {
        if (!q.gold) {
            throw Error(ErrorCode::SchemaError, "test question '" + q.id + "' has no gold answer");
        }
    }

    RunResult run;
    run.per_question.resize(test_pool.size());
    const std::size_t first_index = run_index * config.votes_per_question;
    parallel_for(test_pool.size(), config.max_in_flight, [&](std::size_t i) {
        const auto& question = test_pool.questions[i];
        const auto prompt = render_prompt(exemplars, question);
        std::vector<NormalizedAnswer> votes;
        votes.reserve(config.votes_per_question);
        for (std::size_t v = 0; v < config.votes_per_question; ++v) {
            const auto raw = cache_get_or_fetch(cache, backend, prompt, config.temperature, first_index + v);
            votes.push_back(extract_answer(raw, question));
        }
        auto& result = run.per_question[i];
        result.question_id = question.id;
        result.votes = distribution_from_samples(votes);
        result.chosen = self_consistency_answer(votes);
        result.gold = *question.gold;
        result.correct = result.chosen.valid && result.chosen == result.gold;
    });
    std::sort(run.per_question.begin(), run.per_question.end(),
              [](const QuestionResult& a, const QuestionResult& b) { return a.question_id < b.question_id; });
    const auto correct = std::count_if(run.per_question.begin(), run.per_question.end(),
                                       [](const QuestionResult& r) { return r.correct; });
    run.accuracy = static_cast<double>(correct) / static_cast<double>(run.per_question.size());
    return run;
}

EvalResult evaluate(const ExemplarSet& exemplars, const QuestionPool& test_pool, ModelBackend& backend,
                    const EvalConfig& config, ResponseCache& cache) {
    validate_eval_config(config);
    std::vector<RunResult> runs;
    runs.reserve(config.runs);
    for (std::size_t r = 0; r < config.runs; ++r) {
        runs.push_back(evaluate_run(exemplars, test_pool, backend, config, cache, r));
    }
    return aggregate(std::move(runs));
}

EvalResult aggregate(std::vector<RunResult> runs) {
    if (runs.empty()) {
        throw Error(ErrorCode::InvalidConfig, "no runs to aggregate");
    }
    EvalResult result;
    result.runs = std::move(runs);
    for (const auto& run : result.runs) {
        result.run_accuracies.push_back(run.accuracy);
    }
    result.mean_accuracy = std::accumulate(result.run_accuracies.begin(), result.run_accuracies.end(), 0.0) /
                           static_cast<double>(result.run_accuracies.size());
    return result;
}

json eval_result_to_json(const EvalResult& result) {
    json runs = json::array();
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        json questions = json::array();
        for (const auto& q : result.runs[r].per_question) {
            questions.push_back({
                {"question_id", q.question_id},
                {"votes", distribution_to_json(q.votes)},
                {"chosen", answer_to_json(q.chosen)},
                {"gold", answer_to_json(q.gold)},
                {"correct", q.correct},
            });
        }
        runs.push_back({{"run", r}, {"accuracy", result.runs[r].accuracy}, {"per_question", std::move(questions)}});
    }
    return {
        {"version", kFormatVersion},
        {"runs", std::move(runs)},
        {"run_accuracies", result.run_accuracies},
        {"mean_accuracy", result.mean_accuracy},
    };
}

std::string eval_result_csv(const EvalResult& result) {
    // Canonical answers are digits, letters or a lowercase word, so no quoting is needed.
    std::string out = "run,question_id,chosen,gold,correct\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        for (const auto& q : result.runs[r].per_question) {
            out += std::to_string(r) + ',' + q.question_id + ',' + (q.chosen.valid ? q.chosen.canonical : "") + ',' +
                   (q.gold.valid ? q.gold.canonical : "") + ',' + (q.correct ? "true" : "false") + '\n';
        }
    }
    return out;
}

} // namespace adaprompt
