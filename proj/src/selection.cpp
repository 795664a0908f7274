#include "adaprompt/selection.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/json_io.hpp"
#include "adaprompt/kmeans.hpp"
#include "adaprompt/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace adaprompt {

namespace {

constexpr std::uint64_t kRandomStream = 0x9e3779b97f4a7c15ULL;

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b])) != 0) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1])) != 0) --e;
    return std::string(text.substr(b, e - b));
}

/// a ranks before b: higher score, then smaller id.
bool ranks_before(const ScoredEntry& a, const ScoredEntry& b, Metric metric) {
    const double sa = a.score(metric);
    const double sb = b.score(metric);
    if (sa != sb) return sa > sb;
    return a.question_id < b.question_id;
}

NormalizedAnswer modal_valid_answer(const UncertaintyReport& report) {
    const std::pair<NormalizedAnswer, std::size_t>* best = nullptr;
    for (const auto& entry : report.distribution.counts) {
        if (!entry.first.valid) continue;
        if (best == nullptr || entry.second > best->second) best = &entry;
    }
    return best == nullptr ? NormalizedAnswer{} : best->first;
}

/// Text before the final "The answer is ..." sentence, so that rendering
/// does not repeat the answer line.
std::string rationale_before_anchor(const std::string& raw) {
    std::string lower(raw);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::string anchor(kAnswerAnchor);
    std::transform(anchor.begin(), anchor.end(), anchor.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto pos = lower.rfind(anchor);
    auto head = trim(pos == std::string::npos ? raw : std::string_view(raw).substr(0, pos));
    return head.empty() ? trim(raw) : head;
}

} // namespace

Annotator stub_annotator(std::string annotator_id) {
    return [annotator_id = std::move(annotator_id)](const AnnotationRequest& request) {
        NormalizedAnswer answer;
        if (request.question.gold && request.question.gold->valid) {
            answer = *request.question.gold;
        } else if (request.report) {
            answer = modal_valid_answer(*request.report);
        }
        if (!answer.valid) {
            throw Error(ErrorCode::AnnotationAborted,
                        "stub annotator has no answer for question '" + request.question.id + "'");
        }
        AnnotationReply reply;
        reply.question_id = request.question.id;
        reply.rationale = "Let us work through the question one step at a time.";
        reply.answer = std::move(answer);
        reply.annotator_id = annotator_id;
        return reply;
    };
}

std::size_t argmax_by_metric(std::span<const ScoredEntry> scored, Metric metric, bool* tie_break_applied) {
    if (scored.empty()) {
        throw Error(ErrorCode::EmptyPool, "nothing to select from");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scored.size(); ++i) {
        if (ranks_before(scored[i], scored[best], metric)) best = i;
    }
    if (tie_break_applied != nullptr) {
        const double top = scored[best].score(metric);
        *tie_break_applied = std::count_if(scored.begin(), scored.end(),
                                           [&](const ScoredEntry& s) { return s.score(metric) == top; }) > 1;
    }
    return best;
}

std::vector<std::size_t> rank_by_metric(std::span<const ScoredEntry> scored, Metric metric) {
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ranks_before(scored[a], scored[b], metric); });
    return order;
}

std::vector<ScoredEntry> scored_entries(std::span<const UncertaintyReport> reports) {
    std::vector<ScoredEntry> out;
    out.reserve(reports.size());
    for (const auto& r : reports) {
        out.push_back({r.question_id, r.disagreement, r.entropy});
    }
    return out;
}

SelectionSession start_session(std::string id, std::string dataset, const QuestionPool& train,
                               const SessionConfig& config, ExemplarSet seed_exemplars) {
    validate_config(config);
    if (config.strategy == Strategy::AutoCoT || config.strategy == Strategy::Fixed) {
        throw Error(ErrorCode::InvalidConfig,
                    std::string(to_string(config.strategy)) + " does not run as an annotation session");
    }
    validate_pool(train);
    SelectionSession session;
    session.id = std::move(id);
    session.dataset = std::move(dataset);
    session.config = config;
    if (config.budget_k == 1 && config.strategy == Strategy::Active) {
        session.config.strategy = Strategy::Adaptive;
    }
    session.pool_snapshot = subsample_pool(train, config.pool_cap_s, config.seed);
    session.pool_snapshot.role = PoolRole::Train;
    if (session.pool_snapshot.size() < config.budget_k) {
        throw Error(ErrorCode::BudgetExceedsPool, "budget k=" + std::to_string(config.budget_k) +
                                                      " exceeds the pool of " +
                                                      std::to_string(session.pool_snapshot.size()));
    }
    seed_exemplars.budget_k = std::max(seed_exemplars.budget_k, seed_exemplars.size());
    session.seed_exemplars = std::move(seed_exemplars);
    session.exemplar_set.budget_k = config.budget_k;
    session.status = SessionStatus::AwaitingScores;
    return session;
}

void advance_scoring(SelectionSession& session, ModelBackend* backend, ResponseCache& cache) {
    if (session.status != SessionStatus::AwaitingScores) {
        throw Error(ErrorCode::InvalidState,
                    "scoring requested in state " + std::string(to_string(session.status)));
    }
    const auto remaining = session.remaining_pool();
    if (remaining.empty()) {
        throw Error(ErrorCode::EmptyPool, "no questions left to select");
    }
    const int round = static_cast<int>(session.exemplar_set.size()) + 1;
    RoundRecord record;
    record.round = round;
    AnnotationRequest request;
    request.round = round;

    if (session.config.strategy == Strategy::Random) {
        const auto order = seeded_permutation(session.pool_snapshot.size(), session.config.seed ^ kRandomStream);
        for (auto index : order) {
            const auto& q = session.pool_snapshot.questions[index];
            if (!session.exemplar_set.contains(q.id)) {
                request.question = q;
                break;
            }
        }
        record.selected_id = request.question.id;
    } else {
        if (backend == nullptr) {
            throw Error(ErrorCode::InvalidConfig, "uncertainty strategies need a model backend");
        }
        const auto context =
            session.config.strategy == Strategy::Adaptive ? session.scoring_context() : session.seed_exemplars;
        auto reports = score_questions(*backend, context, remaining, session.config, cache);
        record.scored = scored_entries(reports);
        const auto best = argmax_by_metric(record.scored, session.config.metric, &record.tie_break_applied);
        record.selected_id = remaining[best].id;
        request.question = remaining[best];
        request.report = std::move(reports[best]);
    }
    session.round_records.push_back(std::move(record));
    session.pending = std::move(request);
    session.status = SessionStatus::AwaitingAnnotation;
}

CommitOutcome commit_annotation(SelectionSession& session, const AnnotationReply& reply) {
    CommitOutcome outcome;
    for (const auto& e : session.exemplar_set.exemplars) {
        if (e.question.id == reply.question_id && e.rationale == reply.rationale && e.answer == reply.answer &&
            e.provenance.annotator_id == reply.annotator_id) {
            outcome.already_committed = true;
            return outcome;
        }
    }
    if (session.status != SessionStatus::AwaitingAnnotation || !session.pending) {
        throw Error(ErrorCode::InvalidState,
                    "session is " + std::string(to_string(session.status)) + ", not awaiting an annotation");
    }
    const auto& pending = *session.pending;
    if (reply.question_id != pending.question.id) {
        throw Error(ErrorCode::InvalidState,
                    "reply for '" + reply.question_id + "' but pending question is '" + pending.question.id + "'");
    }
    if (trim(reply.rationale).empty()) {
        throw Error(ErrorCode::InvalidAnnotation, "rationale must be non-empty");
    }
    if (!reply.answer.valid || reply.answer.kind != pending.question.kind) {
        throw Error(ErrorCode::InvalidAnnotation, "answer does not normalize for this question");
    }
    outcome.annotator_changed = std::any_of(
        session.exemplar_set.exemplars.begin(), session.exemplar_set.exemplars.end(),
        [&](const Exemplar& e) { return e.provenance.annotator_id != reply.annotator_id; });

    Exemplar exemplar;
    exemplar.question = pending.question;
    exemplar.rationale = reply.rationale;
    exemplar.answer = reply.answer;
    exemplar.provenance.round = pending.round;
    exemplar.provenance.strategy = std::string(to_string(session.config.strategy));
    if (pending.report) {
        exemplar.provenance.scores_at_selection = pending.report->scores();
    }
    exemplar.provenance.annotator_id = reply.annotator_id;
    session.exemplar_set.add(std::move(exemplar));
    session.pending.reset();
    session.status = session.exemplar_set.size() == session.config.budget_k ? SessionStatus::Complete
                                                                             : SessionStatus::AwaitingScores;
    return outcome;
}

ExemplarSet run_selection(SelectionSession& session, ModelBackend* backend, const Annotator& annotator,
                          ResponseCache& cache, const CheckpointFn& on_change) {
    for (;;) {
        switch (session.status) {
        case SessionStatus::Complete:
            return session.exemplar_set;
        case SessionStatus::Aborted:
            throw Error(ErrorCode::AnnotationAborted, "session '" + session.id + "' was aborted");
        case SessionStatus::AwaitingScores:
            advance_scoring(session, backend, cache);
            break;
        case SessionStatus::AwaitingAnnotation: {
            const auto reply = annotator(*session.pending);
            commit_annotation(session, reply);
            break;
        }
        }
        if (on_change) {
            on_change(session);
        }
    }
}

ExemplarSet run_selection_in(const SessionPaths& paths, const std::string& dataset, const QuestionPool& train,
                             const SessionConfig& config, ModelBackend* backend, const Annotator& annotator,
                             ExemplarSet seed_exemplars) {
    SelectionSession session;
    if (std::filesystem::exists(paths.session_file())) {
        session = load_session(paths);
        auto expected = config;
        if (expected.budget_k == 1 && expected.strategy == Strategy::Active) {
            expected.strategy = Strategy::Adaptive;
        }
        if (!(session.config == expected) || session.dataset != dataset) {
            throw Error(ErrorCode::InvalidConfig,
                        "'" + paths.dir.string() + "' holds a session with a different dataset or config");
        }
    } else {
        session = start_session(paths.dir.filename().string(), dataset, train, config, std::move(seed_exemplars));
        checkpoint(session, paths);
    }
    ResponseCache cache(paths.cache_dir());
    return run_selection(session, backend, annotator, cache,
                         [&](const SelectionSession& s) { checkpoint(s, paths); });
}

ExemplarSet adaptive_select(const QuestionPool& pool, SessionConfig config, ModelBackend& backend,
                            const Annotator& annotator, const SessionPaths& paths) {
    config.strategy = Strategy::Adaptive;
    return run_selection_in(paths, "", pool, config, &backend, annotator);
}

ExemplarSet active_select(const QuestionPool& pool, SessionConfig config, ModelBackend& backend,
                          const Annotator& annotator, const SessionPaths& paths) {
    config.strategy = Strategy::Active;
    return run_selection_in(paths, "", pool, config, &backend, annotator);
}

ExemplarSet random_select(const QuestionPool& pool, SessionConfig config, const Annotator& annotator,
                          const SessionPaths& paths) {
    config.strategy = Strategy::Random;
    return run_selection_in(paths, "", pool, config, nullptr, annotator);
}

std::vector<AutoCotPick> auto_cot_picks(const QuestionPool& pool, std::size_t k, std::uint64_t seed,
                                        EmbeddingBackend& embedder) {
    std::vector<std::vector<double>> points;
    points.reserve(pool.size());
    for (const auto& q : pool.questions) {
        points.push_back(l2_normalized(embedder.embed(q.text)));
    }
    KMeansOptions options;
    options.k = k;
    options.seed = seed;
    const auto result = kmeans(points, options);

    std::vector<AutoCotPick> picks;
    for (std::size_t c = 0; c < k; ++c) {
        std::optional<AutoCotPick> best;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (result.assignment[i] != c) continue;
            const double d = squared_distance(points[i], result.centroids[c]);
            const auto& id = pool.questions[i].id;
            if (!best || d < best->distance || (d == best->distance && id < best->question_id)) {
                best = AutoCotPick{id, c, d};
            }
        }
        if (!best) {
            throw Error(ErrorCode::DegenerateClustering, "cluster " + std::to_string(c) + " is empty");
        }
        picks.push_back(std::move(*best));
    }
    return picks;
}

ExemplarSet auto_cot_select(const QuestionPool& pool, const SessionConfig& config, ModelBackend& backend,
                            EmbeddingBackend& embedder, ResponseCache& cache) {
    validate_config(config);
    validate_pool(pool);
    const auto candidates = subsample_pool(pool, config.pool_cap_s, config.seed);
    if (candidates.size() < config.budget_k) {
        throw Error(ErrorCode::BudgetExceedsPool, "budget exceeds the pool");
    }
    const auto picks = auto_cot_picks(candidates, config.budget_k, config.seed, embedder);
    ExemplarSet out;
    out.budget_k = config.budget_k;
    const ExemplarSet zero_shot;
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const auto& question = *candidates.find(picks[i].question_id);
        const auto raw = cache_get_or_fetch(cache, backend, render_prompt(zero_shot, question), 0.0, 0);
        Exemplar exemplar;
        exemplar.question = question;
        exemplar.answer = extract_answer(raw, question);
        if (exemplar.answer.valid) {
            exemplar.rationale = rationale_before_anchor(raw);
        } else {
            exemplar.rationale = trim(raw);
            exemplar.provenance.flagged = true;
        }
        if (exemplar.rationale.empty()) {
            exemplar.rationale = "(empty completion)";
        }
        exemplar.provenance.round = static_cast<int>(i + 1);
        exemplar.provenance.strategy = std::string(to_string(Strategy::AutoCoT));
        exemplar.provenance.annotator_id = "zero-shot:" + backend.identity();
        out.add(std::move(exemplar));
    }
    return out;
}

ExemplarSet fixed_exemplars(const std::filesystem::path& path) {
    return load_exemplar_file(path).exemplars;
}

} // namespace adaprompt
