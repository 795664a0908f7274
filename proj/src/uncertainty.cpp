#include "adaprompt/uncertainty.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/parallel.hpp"
#include "adaprompt/parsing.hpp"

#include <algorithm>
#include <cmath>

namespace adaprompt {

std::size_t AnswerDistribution::count_of(const NormalizedAnswer& answer) const {
    for (const auto& [a, n] : counts) {
        if (answers_equal(a, answer)) return n;
    }
    return 0;
}

AnswerDistribution distribution_from_samples(std::span<const NormalizedAnswer> answers) {
    if (answers.empty()) {
        throw Error(ErrorCode::EmptySample, "cannot build a distribution from zero samples");
    }
    AnswerDistribution d;
    d.total = answers.size();
    for (const auto& answer : answers) {
        auto it = std::find_if(d.counts.begin(), d.counts.end(),
                               [&](const auto& entry) { return answers_equal(entry.first, answer); });
        if (it == d.counts.end()) {
            d.counts.emplace_back(answer, 1);
        } else {
            ++it->second;
        }
    }
    return d;
}

double disagreement_score(const AnswerDistribution& distribution) {
    return static_cast<double>(distribution.unique()) / static_cast<double>(distribution.total);
}

double entropy_score(const AnswerDistribution& distribution) {
    if (distribution.unique() <= 1) {
        return 0.0;
    }
    // Summing over sorted counts makes the result a function of the count
    // multiset alone, so equal distributions tie exactly.
    std::vector<std::size_t> counts;
    counts.reserve(distribution.unique());
    for (const auto& entry : distribution.counts) {
        counts.push_back(entry.second);
    }
    std::sort(counts.begin(), counts.end());
    const double total = static_cast<double>(distribution.total);
    double entropy = 0.0;
    for (auto count : counts) {
        const double p = static_cast<double>(count) / total;
        entropy -= p * std::log(p);
    }
    return entropy;
}

UncertaintyReport report_from_samples(const std::string& question_id, const std::string& exemplar_hash,
                                      std::vector<SampledAnswer> samples) {
    std::vector<NormalizedAnswer> answers;
    answers.reserve(samples.size());
    for (const auto& s : samples) {
        answers.push_back(s.answer);
    }
    UncertaintyReport report;
    report.question_id = question_id;
    report.exemplar_set_hash = exemplar_hash;
    report.distribution = distribution_from_samples(answers);
    report.samples = std::move(samples);
    report.disagreement = disagreement_score(report.distribution);
    report.entropy = entropy_score(report.distribution);
    return report;
}

UncertaintyReport score_question(ModelBackend& backend, const ExemplarSet& exemplars, const Question& question,
                                 const SessionConfig& config, ResponseCache& cache) {
    if (config.samples_l < 1) {
        throw Error(ErrorCode::InvalidConfig, "samples_l must be >= 1");
    }
    const auto prompt = render_prompt(exemplars, question);
    std::vector<SampledAnswer> samples;
    samples.reserve(config.samples_l);
    for (std::size_t i = 0; i < config.samples_l; ++i) {
        auto raw = cache_get_or_fetch(cache, backend, prompt, config.sampling_temperature, i);
        auto answer = extract_answer(raw, question);
        samples.push_back({std::move(raw), std::move(answer)});
    }
    return report_from_samples(question.id, exemplar_set_hash(exemplars), std::move(samples));
}

std::vector<UncertaintyReport> score_questions(ModelBackend& backend, const ExemplarSet& exemplars,
                                               std::span<const Question> questions, const SessionConfig& config,
                                               ResponseCache& cache) {
    std::vector<UncertaintyReport> reports(questions.size());
    parallel_for(questions.size(), config.max_in_flight, [&](std::size_t i) {
        reports[i] = score_question(backend, exemplars, questions[i], config, cache);
    });
    return reports;
}

json distribution_to_json(const AnswerDistribution& distribution) {
    json counts = json::array();
    for (const auto& [answer, count] : distribution.counts) {
        counts.push_back({{"answer", answer_to_json(answer)}, {"count", count}});
    }
    return {{"counts", std::move(counts)}, {"total", distribution.total}};
}

json report_to_json(const UncertaintyReport& report) {
    json samples = json::array();
    for (const auto& s : report.samples) {
        samples.push_back({{"raw", s.raw}, {"answer", answer_to_json(s.answer)}});
    }
    return {
        {"question_id", report.question_id},
        {"exemplar_set_hash", report.exemplar_set_hash},
        {"samples", std::move(samples)},
        {"distribution", distribution_to_json(report.distribution)},
        {"disagreement", report.disagreement},
        {"entropy", report.entropy},
    };
}

UncertaintyReport report_from_json(const json& j, const Question& question) {
    try {
        std::vector<SampledAnswer> samples;
        for (const auto& s : j.at("samples")) {
            samples.push_back({s.at("raw").get<std::string>(), answer_from_json(s.at("answer"), question)});
        }
        return report_from_samples(j.at("question_id").get<std::string>(),
                                   j.at("exemplar_set_hash").get<std::string>(), std::move(samples));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("malformed uncertainty report: ") + e.what());
    }
}

} // namespace adaprompt
