#pragma once

#include "adaprompt/backend.hpp"
#include "adaprompt/cache.hpp"
#include "adaprompt/domain.hpp"
#include "adaprompt/session.hpp"
#include "adaprompt/uncertainty.hpp"

#include <functional>
#include <span>
#include <string>

namespace adaprompt {

/// Supplies the reasoning chain and answer for a selected question. Throws
/// Error(AnnotationAborted) to stop; the session stays resumable.
using Annotator = std::function<AnnotationReply(const AnnotationRequest&)>;

/// Answers from the gold label (or, without one, the modal sampled answer)
/// with a fixed templated rationale. For tests and unattended runs.
Annotator stub_annotator(std::string annotator_id = "stub");

/// Index of the highest-scoring entry; ties go to the smallest question id.
/// `tie_break_applied` reports whether more than one entry held the maximum.
std::size_t argmax_by_metric(std::span<const ScoredEntry> scored, Metric metric, bool* tie_break_applied = nullptr);

/// All indices, best first, under the same ordering as argmax_by_metric.
std::vector<std::size_t> rank_by_metric(std::span<const ScoredEntry> scored, Metric metric);

std::vector<ScoredEntry> scored_entries(std::span<const UncertaintyReport> reports);

/// Fresh session over the (subsampled) training pool, status AwaitingScores.
/// Throws Error(InvalidConfig) for strategies that do not run as an
/// annotation loop (auto_cot, fixed) and Error(BudgetExceedsPool) when the
/// subsampled pool is smaller than k. With k = 1 the active strategy is
/// recorded as adaptive: a single round over E = {} is the same procedure.
SelectionSession start_session(std::string id, std::string dataset, const QuestionPool& train,
                               const SessionConfig& config, ExemplarSet seed_exemplars = {});

/// AwaitingScores -> AwaitingAnnotation. Adaptive scores the remaining pool
/// given the current exemplars; active scores it with no exemplars (cache
/// hits after the first round); random takes the next question of a seeded
/// permutation without querying the model.
void advance_scoring(SelectionSession& session, ModelBackend* backend, ResponseCache& cache);

struct CommitOutcome {
    bool already_committed = false;
    /// The reply's annotator differs from an earlier exemplar's.
    bool annotator_changed = false;
};

/// Adds the pending question as an exemplar; the session moves to
/// AwaitingScores or Complete. Re-posting an already committed reply is a
/// no-op reported through `already_committed`. Throws Error(InvalidState)
/// out of state or for a stale question id, Error(InvalidAnnotation) for an
/// empty rationale or an invalid answer.
CommitOutcome commit_annotation(SelectionSession& session, const AnnotationReply& reply);

/// Called after every state change; the default persists to a session directory.
using CheckpointFn = std::function<void(const SelectionSession&)>;

/// Drives the session to completion: score, annotate, commit, checkpoint,
/// repeat. Resumes from whatever state the session is in.
ExemplarSet run_selection(SelectionSession& session, ModelBackend* backend, const Annotator& annotator,
                          ResponseCache& cache, const CheckpointFn& on_change);

/// Creates or resumes the session stored in `paths.dir` and runs it to completion.
/// A stored session must have been created with the same config.
ExemplarSet run_selection_in(const SessionPaths& paths, const std::string& dataset, const QuestionPool& train,
                             const SessionConfig& config, ModelBackend* backend, const Annotator& annotator,
                             ExemplarSet seed_exemplars = {});

ExemplarSet adaptive_select(const QuestionPool& pool, SessionConfig config, ModelBackend& backend,
                            const Annotator& annotator, const SessionPaths& paths);
ExemplarSet active_select(const QuestionPool& pool, SessionConfig config, ModelBackend& backend,
                          const Annotator& annotator, const SessionPaths& paths);
ExemplarSet random_select(const QuestionPool& pool, SessionConfig config, const Annotator& annotator,
                          const SessionPaths& paths);

struct AutoCotPick {
    std::string question_id;
    std::size_t cluster = 0;
    double distance = 0.0;
};

/// Clusters L2-normalized question embeddings into k groups and returns the
/// member nearest each centroid (ties: smallest id), in cluster order.
std::vector<AutoCotPick> auto_cot_picks(const QuestionPool& pool, std::size_t k, std::uint64_t seed,
                                        EmbeddingBackend& embedder);

/// Auto-CoT baseline: cluster picks, each annotated by one zero-shot
/// completion at temperature 0. When no answer can be extracted the raw
/// completion is kept as the rationale and the exemplar is flagged.
ExemplarSet auto_cot_select(const QuestionPool& pool, const SessionConfig& config, ModelBackend& backend,
                            EmbeddingBackend& embedder, ResponseCache& cache);

/// Hand-authored exemplar set; throws Error(SchemaError).
ExemplarSet fixed_exemplars(const std::filesystem::path& path);

} // namespace adaprompt
