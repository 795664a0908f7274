#pragma once

#include "adaprompt/cache.hpp"
#include "adaprompt/domain.hpp"
#include "adaprompt/json_io.hpp"
#include "adaprompt/uncertainty.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace adaprompt {

struct ScoredEntry {
    std::string question_id;
    double disagreement = 0.0;
    double entropy = 0.0;

    [[nodiscard]] double score(Metric metric) const {
        return metric == Metric::Disagreement ? disagreement : entropy;
    }

    friend bool operator==(const ScoredEntry&, const ScoredEntry&) = default;
};

/// Audit entry for one selection round.
struct RoundRecord {
    int round = 0;
    std::vector<ScoredEntry> scored;
    std::string selected_id;
    bool tie_break_applied = false;

    friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct AnnotationRequest {
    int round = 0;
    Question question;
    /// Absent for strategies that do not query the model (random).
    std::optional<UncertaintyReport> report;

    friend bool operator==(const AnnotationRequest&, const AnnotationRequest&) = default;
};

struct AnnotationReply {
    std::string question_id;
    std::string rationale;
    NormalizedAnswer answer;
    std::string annotator_id;
};

enum class SessionStatus { AwaitingScores, AwaitingAnnotation, Complete, Aborted };

std::string_view to_string(SessionStatus status);
std::optional<SessionStatus> session_status_from_string(std::string_view text);

/// Resumable state of one selection run.
///
/// Invariants: status == AwaitingAnnotation exactly when `pending` is set, and
/// round_records.size() == exemplar_set.size() + (pending ? 1 : 0). An
/// aborted session may keep one extra record for its unanswered round.
struct SelectionSession {
    std::string id;
    std::string dataset;
    SessionConfig config;
    QuestionPool pool_snapshot;
    /// Optional hand-written exemplars placed before the selected ones in
    /// every scoring prompt. They are not part of the exported set.
    ExemplarSet seed_exemplars;
    ExemplarSet exemplar_set;
    std::vector<RoundRecord> round_records;
    SessionStatus status = SessionStatus::AwaitingScores;
    std::optional<AnnotationRequest> pending;

    [[nodiscard]] std::vector<Question> remaining_pool() const;
    /// Prompt context for the next scoring pass: seed exemplars, then E.
    [[nodiscard]] ExemplarSet scoring_context() const;

    friend bool operator==(const SelectionSession&, const SelectionSession&) = default;
};

/// Throws Error(CorruptCheckpoint) when a structural invariant is violated.
void check_session_invariants(const SelectionSession& session);

json round_record_to_json(const RoundRecord& record);
RoundRecord round_record_from_json(const json& j);
json annotation_request_to_json(const AnnotationRequest& request);
json session_to_json(const SelectionSession& session);
SelectionSession session_from_json(const json& j);

/// One line per round record.
std::string dump_audit_log(const SelectionSession& session);
ExemplarFile exemplar_file_of(const SelectionSession& session);

/// Files of a session directory:
///   session.json    full state with a SHA-256 checksum of its payload
///   audit.jsonl     round records
///   cache/          response cache, one file per key
///   exemplars.json  written once the session is complete
struct SessionPaths {
    std::filesystem::path dir;

    [[nodiscard]] std::filesystem::path session_file() const { return dir / "session.json"; }
    [[nodiscard]] std::filesystem::path audit_file() const { return dir / "audit.jsonl"; }
    [[nodiscard]] std::filesystem::path cache_dir() const { return dir / "cache"; }
    [[nodiscard]] std::filesystem::path exemplar_file() const { return dir / "exemplars.json"; }
};

/// Atomically rewrites session.json and audit.jsonl (and exemplars.json when complete).
void checkpoint(const SelectionSession& session, const SessionPaths& paths);

/// Throws Error(UnknownSession) when there is no session.json and
/// Error(CorruptCheckpoint) when it does not parse or fails its checksum.
SelectionSession load_session(const SessionPaths& paths);

/// Sessions kept side by side under one root, one directory per id.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    [[nodiscard]] SessionPaths paths(const std::string& id) const;
    [[nodiscard]] std::string new_id() const;
    [[nodiscard]] SelectionSession load(const std::string& id) const;
    [[nodiscard]] std::vector<std::string> list() const;
    [[nodiscard]] const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

} // namespace adaprompt
