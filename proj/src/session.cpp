#include "adaprompt/session.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/hashing.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

namespace adaprompt {

namespace {

[[noreturn]] void corrupt(const std::string& message) {
    throw Error(ErrorCode::CorruptCheckpoint, message);
}

json exemplar_set_to_json(const ExemplarSet& set) {
    json list = json::array();
    for (const auto& e : set.exemplars) {
        list.push_back(exemplar_to_json(e));
    }
    return {{"budget_k", set.budget_k}, {"exemplars", std::move(list)}};
}

ExemplarSet exemplar_set_from_json(const json& j) {
    ExemplarSet set;
    set.budget_k = j.at("budget_k").get<std::size_t>();
    for (const auto& e : j.at("exemplars")) {
        set.exemplars.push_back(exemplar_from_json(e));
    }
    return set;
}

} // namespace

std::string_view to_string(SessionStatus status) {
    switch (status) {
    case SessionStatus::AwaitingScores: return "AwaitingScores";
    case SessionStatus::AwaitingAnnotation: return "AwaitingAnnotation";
    case SessionStatus::Complete: return "Complete";
    case SessionStatus::Aborted: return "Aborted";
    }
    return "AwaitingScores";
}

std::optional<SessionStatus> session_status_from_string(std::string_view text) {
    for (auto s : {SessionStatus::AwaitingScores, SessionStatus::AwaitingAnnotation, SessionStatus::Complete,
                   SessionStatus::Aborted}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

std::vector<Question> SelectionSession::remaining_pool() const {
    std::vector<Question> out;
    out.reserve(pool_snapshot.size());
    for (const auto& q : pool_snapshot.questions) {
        if (!exemplar_set.contains(q.id)) {
            out.push_back(q);
        }
    }
    return out;
}

ExemplarSet SelectionSession::scoring_context() const {
    ExemplarSet context;
    context.budget_k = seed_exemplars.size() + exemplar_set.size();
    context.exemplars = seed_exemplars.exemplars;
    context.exemplars.insert(context.exemplars.end(), exemplar_set.exemplars.begin(), exemplar_set.exemplars.end());
    return context;
}

void check_session_invariants(const SelectionSession& session) {
    const bool awaiting = session.status == SessionStatus::AwaitingAnnotation;
    if (awaiting != session.pending.has_value()) {
        corrupt("pending annotation does not match status " + std::string(to_string(session.status)));
    }
    const auto records = session.round_records.size();
    const auto expected = session.exemplar_set.size() + (awaiting ? 1 : 0);
    // An abort may strand the record of a round that was never annotated.
    const bool stranded = session.status == SessionStatus::Aborted && records == expected + 1;
    if (records != expected && !stranded) {
        corrupt("round record count does not match the exemplar set");
    }
    if (session.exemplar_set.size() > session.exemplar_set.budget_k) {
        corrupt("exemplar set exceeds its budget");
    }
    for (std::size_t i = 0; i < session.exemplar_set.size(); ++i) {
        const auto& e = session.exemplar_set.exemplars[i];
        if (e.provenance.round != static_cast<int>(i + 1)) {
            corrupt("exemplar rounds are not contiguous from 1");
        }
        if (session.pool_snapshot.find(e.question.id) == nullptr) {
            corrupt("exemplar '" + e.question.id + "' is not in the pool snapshot");
        }
    }
}

json round_record_to_json(const RoundRecord& record) {
    json scored = json::array();
    for (const auto& s : record.scored) {
        scored.push_back({{"question_id", s.question_id}, {"disagreement", s.disagreement}, {"entropy", s.entropy}});
    }
    return {
        {"round", record.round},
        {"scored", std::move(scored)},
        {"selected_id", record.selected_id},
        {"tie_break_applied", record.tie_break_applied},
    };
}

RoundRecord round_record_from_json(const json& j) {
    RoundRecord r;
    r.round = j.at("round").get<int>();
    for (const auto& s : j.at("scored")) {
        r.scored.push_back({s.at("question_id").get<std::string>(), s.at("disagreement").get<double>(),
                            s.at("entropy").get<double>()});
    }
    r.selected_id = j.at("selected_id").get<std::string>();
    r.tie_break_applied = j.at("tie_break_applied").get<bool>();
    return r;
}

json annotation_request_to_json(const AnnotationRequest& request) {
    return {
        {"round", request.round},
        {"question", question_to_json(request.question)},
        {"report", request.report ? report_to_json(*request.report) : json(nullptr)},
    };
}

json session_to_json(const SelectionSession& session) {
    json pool = json::array();
    for (const auto& q : session.pool_snapshot.questions) {
        pool.push_back(question_to_json(q));
    }
    json records = json::array();
    for (const auto& r : session.round_records) {
        records.push_back(round_record_to_json(r));
    }
    return {
        {"id", session.id},
        {"dataset", session.dataset},
        {"config", config_to_json(session.config)},
        {"pool_snapshot", std::move(pool)},
        {"seed_exemplars", exemplar_set_to_json(session.seed_exemplars)},
        {"exemplar_set", exemplar_set_to_json(session.exemplar_set)},
        {"round_records", std::move(records)},
        {"status", std::string(to_string(session.status))},
        {"pending", session.pending ? annotation_request_to_json(*session.pending) : json(nullptr)},
    };
}

SelectionSession session_from_json(const json& j) {
    SelectionSession s;
    s.id = j.at("id").get<std::string>();
    s.dataset = j.at("dataset").get<std::string>();
    s.config = config_from_json(j.at("config"), SessionConfig{});
    s.pool_snapshot.role = PoolRole::Train;
    for (const auto& q : j.at("pool_snapshot")) {
        s.pool_snapshot.questions.push_back(question_from_json(q));
    }
    s.seed_exemplars = exemplar_set_from_json(j.at("seed_exemplars"));
    s.exemplar_set = exemplar_set_from_json(j.at("exemplar_set"));
    for (const auto& r : j.at("round_records")) {
        s.round_records.push_back(round_record_from_json(r));
    }
    const auto status = session_status_from_string(j.at("status").get<std::string>());
    if (!status) {
        corrupt("unknown session status");
    }
    s.status = *status;
    if (const auto& p = j.at("pending"); !p.is_null()) {
        AnnotationRequest request;
        request.round = p.at("round").get<int>();
        request.question = question_from_json(p.at("question"));
        if (!p.at("report").is_null()) {
            request.report = report_from_json(p.at("report"), request.question);
        }
        s.pending = std::move(request);
    }
    return s;
}

std::string dump_audit_log(const SelectionSession& session) {
    std::string out;
    for (const auto& r : session.round_records) {
        out += round_record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

ExemplarFile exemplar_file_of(const SelectionSession& session) {
    return {session.dataset, std::string(to_string(session.config.strategy)), session.exemplar_set};
}

void checkpoint(const SelectionSession& session, const SessionPaths& paths) {
    const auto payload = session_to_json(session);
    const json envelope{
        {"version", kFormatVersion},
        {"checksum", sha256_hex(payload.dump())},
        {"payload", payload},
    };
    std::filesystem::create_directories(paths.dir);
    write_file_atomic(paths.audit_file(), dump_audit_log(session));
    if (session.status == SessionStatus::Complete) {
        save_exemplar_file(paths.exemplar_file(), exemplar_file_of(session));
    }
    write_file_atomic(paths.session_file(), envelope.dump(1) + "\n");
}

SelectionSession load_session(const SessionPaths& paths) {
    if (!std::filesystem::is_regular_file(paths.session_file())) {
        throw Error(ErrorCode::UnknownSession, "no session at '" + paths.dir.string() + "'");
    }
    json envelope;
    try {
        envelope = json::parse(read_file(paths.session_file()));
    } catch (const json::exception& e) {
        corrupt(std::string("session.json does not parse: ") + e.what());
    }
    try {
        if (envelope.at("version").get<int>() != kFormatVersion) {
            corrupt("unsupported session version");
        }
        const auto& payload = envelope.at("payload");
        if (sha256_hex(payload.dump()) != envelope.at("checksum").get<std::string>()) {
            corrupt("session.json checksum mismatch");
        }
        auto session = session_from_json(payload);
        check_session_invariants(session);
        return session;
    } catch (const json::exception& e) {
        corrupt(std::string("session.json is malformed: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptCheckpoint) throw;
        corrupt(e.what());
    }
}

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

SessionPaths SessionStore::paths(const std::string& id) const {
    const bool safe = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_';
    });
    if (!safe) {
        throw Error(ErrorCode::UnknownSession, "invalid session id '" + id + "'");
    }
    return {root_ / id};
}

std::string SessionStore::new_id() const {
    static constexpr char kHex[] = "0123456789abcdef";
    std::random_device device;
    for (;;) {
        std::string id = "s-";
        for (int i = 0; i < 12; ++i) {
            id.push_back(kHex[device() & 0x0f]);
        }
        if (!std::filesystem::exists(root_ / id)) {
            return id;
        }
    }
}

SelectionSession SessionStore::load(const std::string& id) const {
    return load_session(paths(id));
}

std::vector<std::string> SessionStore::list() const {
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "session.json")) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace adaprompt
