#include "adaprompt/annotation_service.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/parsing.hpp"
#include "adaprompt/selection.hpp"

#include <httplib.h>

#include <condition_variable>
#include <thread>

namespace adaprompt {

namespace {

using Reply = AnnotationService::Reply;

Reply error_reply(int status, std::string_view code, const std::string& message) {
    return {status, json{{"code", code}, {"message", message}}, std::nullopt};
}

int http_status_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::InvalidState: return 409;
    case ErrorCode::InvalidAnnotation: return 422;
    case ErrorCode::CorruptCheckpoint: return 500;
    default: return 400;
    }
}

Reply error_reply(const Error& e) {
    return error_reply(http_status_of(e.code()), to_string(e.code()), e.what());
}

json pending_to_json(const AnnotationRequest& request) {
    json choices = json::array();
    for (const auto& c : request.question.choices) {
        choices.push_back({{"label", c.label}, {"text", c.text}});
    }
    json out{
        {"round", request.round},
        {"question",
         {{"id", request.question.id},
          {"text", request.question.text},
          {"kind", to_string(request.question.kind)},
          {"choices", std::move(choices)}}},
        {"samples", json::array()},
        {"distribution", json::array()},
        {"disagreement", nullptr},
        {"entropy", nullptr},
    };
    if (request.report) {
        for (const auto& s : request.report->samples) {
            out["samples"].push_back({{"raw", s.raw}, {"answer", answer_to_json(s.answer)}});
        }
        for (const auto& [answer, count] : request.report->distribution.counts) {
            out["distribution"].push_back({{"answer", answer_to_json(answer)}, {"count", count}});
        }
        out["disagreement"] = request.report->disagreement;
        out["entropy"] = request.report->entropy;
    }
    return out;
}

std::string answer_text_of(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number() || value.is_boolean()) return value.dump();
    throw Error(ErrorCode::SchemaError, "'answer' must be a string or a number");
}

std::string required_string(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string()) {
        throw Error(ErrorCode::SchemaError, std::string("'") + key + "' must be a string");
    }
    return body.at(key).get<std::string>();
}

} // namespace

void DatasetRegistry::add(DatasetManifest manifest) {
    auto name = manifest.name;
    manifests_.insert_or_assign(std::move(name), std::move(manifest));
}

DatasetRegistry DatasetRegistry::scan(const std::filesystem::path& path) {
    DatasetRegistry registry;
    if (std::filesystem::is_regular_file(path)) {
        registry.add(load_manifest(path));
        return registry;
    }
    if (!std::filesystem::is_directory(path)) {
        throw Error(ErrorCode::SchemaError, "no dataset manifests at '" + path.string() + "'");
    }
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            try {
                registry.add(load_manifest(entry.path()));
            } catch (const Error&) {
                // Other JSON files (fixtures, exemplar sets) may share the directory.
            }
        }
    }
    return registry;
}

const DatasetManifest* DatasetRegistry::find(const std::string& name) const {
    const auto it = manifests_.find(name);
    return it == manifests_.end() ? nullptr : &it->second;
}

std::vector<std::string> DatasetRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, manifest] : manifests_) out.push_back(name);
    return out;
}

struct AnnotationService::Live {
    std::mutex mutex;
    std::condition_variable idle;
    SelectionSession session;
    SessionPaths paths;
    std::unique_ptr<ResponseCache> cache;
    bool scoring = false;
    std::optional<std::string> scoring_error;
    std::optional<std::string> annotator_warning;
    std::jthread worker;
};

AnnotationService::AnnotationService(Options options)
    : options_(std::move(options)), store_(options_.session_root) {}

AnnotationService::~AnnotationService() {
    wait_idle();
    std::lock_guard lock(sessions_mutex_);
    sessions_.clear();
}

std::shared_ptr<AnnotationService::Live> AnnotationService::live(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    if (const auto it = sessions_.find(id); it != sessions_.end()) {
        return it->second;
    }
    auto entry = std::make_shared<Live>();
    entry->paths = store_.paths(id);
    entry->session = load_session(entry->paths);
    entry->cache = std::make_unique<ResponseCache>(entry->paths.cache_dir());
    sessions_.emplace(id, entry);
    std::unique_lock session_lock(entry->mutex);
    if (entry->session.status == SessionStatus::AwaitingScores) {
        start_scoring(entry);
    }
    return entry;
}

// Caller holds session->mutex.
void AnnotationService::start_scoring(const std::shared_ptr<Live>& session) {
    session->scoring_error.reset();
    if (options_.synchronous_scoring) {
        try {
            advance_scoring(session->session, options_.backend.get(), *session->cache);
            checkpoint(session->session, session->paths);
        } catch (const std::exception& e) {
            session->scoring_error = e.what();
        }
        return;
    }
    session->scoring = true;
    Live* target = session.get();
    ModelBackend* backend = options_.backend.get();
    // The previous worker has already cleared `scoring`; joining it is immediate.
    session->worker = std::jthread([target, backend, snapshot = session->session]() mutable {
        std::optional<std::string> failure;
        try {
            advance_scoring(snapshot, backend, *target->cache);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        std::lock_guard lock(target->mutex);
        const bool still_wanted = target->session.status == SessionStatus::AwaitingScores &&
                                  target->session.exemplar_set.size() == snapshot.exemplar_set.size();
        if (!failure && still_wanted) {
            try {
                checkpoint(snapshot, target->paths);
                target->session = std::move(snapshot);
            } catch (const std::exception& e) {
                failure = e.what();
            }
        }
        target->scoring_error = failure;
        target->scoring = false;
        target->idle.notify_all();
    });
}

void AnnotationService::adopt(const std::string& id) {
    (void)live(id);
}

void AnnotationService::wait_idle() {
    std::vector<std::shared_ptr<Live>> all;
    {
        std::lock_guard lock(sessions_mutex_);
        for (const auto& [id, s] : sessions_) all.push_back(s);
    }
    for (const auto& s : all) {
        std::unique_lock lock(s->mutex);
        s->idle.wait(lock, [&] { return !s->scoring; });
    }
}

SessionStatus AnnotationService::status_of(const std::string& id) {
    auto s = live(id);
    std::lock_guard lock(s->mutex);
    return s->session.status;
}

json AnnotationService::view_of(const Live& live) const {
    const auto& s = live.session;
    json progress = json::array();
    for (const auto& e : s.exemplar_set.exemplars) {
        progress.push_back({
            {"round", e.provenance.round},
            {"question_id", e.question.id},
            {"annotator_id", e.provenance.annotator_id},
            {"scores", e.provenance.scores_at_selection ? scores_to_json(*e.provenance.scores_at_selection)
                                                        : json(nullptr)},
        });
    }
    const auto done = s.exemplar_set.size();
    return {
        {"id", s.id},
        {"dataset", s.dataset},
        {"status", to_string(s.status)},
        {"round", s.status == SessionStatus::Complete ? done : done + 1},
        {"budget_k", s.config.budget_k},
        {"strategy", to_string(s.config.strategy)},
        {"metric", to_string(s.config.metric)},
        {"config", config_to_json(s.config)},
        {"remaining", s.pool_snapshot.size() - done},
        {"scoring", live.scoring},
        {"scoring_error", live.scoring_error ? json(*live.scoring_error) : json(nullptr)},
        {"annotator_warning", live.annotator_warning ? json(*live.annotator_warning) : json(nullptr)},
        {"pending", s.pending ? pending_to_json(*s.pending) : json(nullptr)},
        {"progress", std::move(progress)},
    };
}

Reply AnnotationService::create_session(const json& body) {
    try {
        if (!body.is_object()) {
            throw Error(ErrorCode::SchemaError, "request body must be a JSON object");
        }
        const auto name = required_string(body, "dataset");
        const auto* manifest = options_.datasets.find(name);
        if (manifest == nullptr) {
            return error_reply(404, "UnknownDataset", "no dataset named '" + name + "'");
        }
        const auto base = manifest->preset_k ? SessionConfig::for_budget(*manifest->preset_k) : SessionConfig{};
        const auto config = config_from_json(body.value("config", json::object()), base);
        const auto train = load_pool_jsonl(manifest->train_path, PoolRole::Train);

        auto entry = std::make_shared<Live>();
        std::lock_guard lock(sessions_mutex_);
        const auto id = store_.new_id();
        entry->paths = store_.paths(id);
        entry->session = start_session(id, name, train, config);
        entry->cache = std::make_unique<ResponseCache>(entry->paths.cache_dir());
        checkpoint(entry->session, entry->paths);
        sessions_.emplace(id, entry);
        std::lock_guard session_lock(entry->mutex);
        start_scoring(entry);
        return {201, json{{"id", id}, {"status", to_string(entry->session.status)}}, std::nullopt};
    } catch (const Error& e) {
        return error_reply(e);
    } catch (const json::exception& e) {
        return error_reply(400, "SchemaError", e.what());
    }
}

Reply AnnotationService::list_sessions() {
    json sessions = json::array();
    for (const auto& id : store_.list()) {
        try {
            auto s = live(id);
            std::lock_guard lock(s->mutex);
            sessions.push_back(view_of(*s));
        } catch (const Error&) {
            // A corrupt directory is skipped rather than failing the listing.
        }
    }
    return {200, json{{"sessions", std::move(sessions)}}, std::nullopt};
}

Reply AnnotationService::get_session(const std::string& id) {
    try {
        auto s = live(id);
        std::lock_guard lock(s->mutex);
        return {200, view_of(*s), std::nullopt};
    } catch (const Error& e) {
        return error_reply(e);
    }
}

Reply AnnotationService::get_pending(const std::string& id) {
    try {
        auto s = live(id);
        std::lock_guard lock(s->mutex);
        switch (s->session.status) {
        case SessionStatus::AwaitingAnnotation:
            return {200, pending_to_json(*s->session.pending), std::nullopt};
        case SessionStatus::Complete:
            return error_reply(410, "SessionComplete", "all " + std::to_string(s->session.config.budget_k) +
                                                           " exemplars are annotated");
        case SessionStatus::Aborted:
            return error_reply(409, "SessionAborted", "session was aborted");
        case SessionStatus::AwaitingScores:
            break;
        }
        std::string message = "uncertainty scores are being computed";
        if (!s->scoring && s->scoring_error) {
            message = "previous scoring attempt failed (" + *s->scoring_error + "); retrying";
            start_scoring(s);
        }
        return error_reply(409, "ScoringInProgress", message);
    } catch (const Error& e) {
        return error_reply(e);
    }
}

Reply AnnotationService::post_annotation(const std::string& id, const json& body) {
    try {
        auto s = live(id);
        if (!body.is_object()) {
            throw Error(ErrorCode::SchemaError, "request body must be a JSON object");
        }
        AnnotationReply reply;
        reply.question_id = required_string(body, "question_id");
        reply.rationale = required_string(body, "rationale");
        reply.annotator_id = required_string(body, "annotator_id");
        if (reply.annotator_id.empty()) {
            throw Error(ErrorCode::SchemaError, "'annotator_id' must be non-empty");
        }
        if (!body.contains("answer")) {
            throw Error(ErrorCode::SchemaError, "'answer' is required");
        }
        const auto answer_text = answer_text_of(body.at("answer"));

        std::lock_guard lock(s->mutex);
        auto& session = s->session;
        const Question* question = nullptr;
        if (session.pending && session.pending->question.id == reply.question_id) {
            question = &session.pending->question;
        } else {
            question = session.pool_snapshot.find(reply.question_id);
        }
        if (question == nullptr) {
            return error_reply(409, "InvalidState", "question '" + reply.question_id + "' is not in this session");
        }
        reply.answer = normalize_answer_text(answer_text, *question);

        const auto outcome = commit_annotation(session, reply);
        json out{{"alreadyCommitted", outcome.already_committed}};
        if (!outcome.already_committed) {
            if (outcome.annotator_changed) {
                s->annotator_warning = "annotator changed to '" + reply.annotator_id +
                                       "' mid-session; exemplars should come from one annotator";
                out["warning"] = *s->annotator_warning;
            }
            checkpoint(session, s->paths);
            if (session.status == SessionStatus::AwaitingScores) {
                start_scoring(s);
            }
        }
        out["status"] = to_string(session.status);
        return {200, std::move(out), std::nullopt};
    } catch (const Error& e) {
        return error_reply(e);
    } catch (const json::exception& e) {
        return error_reply(400, "SchemaError", e.what());
    }
}

Reply AnnotationService::get_export(const std::string& id) {
    try {
        auto s = live(id);
        std::lock_guard lock(s->mutex);
        if (s->session.status != SessionStatus::Complete) {
            return error_reply(409, "NotComplete",
                               "session is " + std::string(to_string(s->session.status)) + ", not Complete");
        }
        return {200, nullptr, read_file(s->paths.exemplar_file())};
    } catch (const Error& e) {
        return error_reply(e);
    }
}

Reply AnnotationService::get_uncertainty(const std::string& id) {
    try {
        auto s = live(id);
        std::lock_guard lock(s->mutex);
        if (s->session.round_records.empty()) {
            return error_reply(409, "ScoringInProgress", "no round has been scored yet");
        }
        // Same bytes as the round's audit.jsonl line.
        return {200, nullptr, round_record_to_json(s->session.round_records.back()).dump()};
    } catch (const Error& e) {
        return error_reply(e);
    }
}

Reply AnnotationService::abort_session(const std::string& id) {
    try {
        auto s = live(id);
        std::lock_guard lock(s->mutex);
        auto& session = s->session;
        if (session.status == SessionStatus::Complete || session.status == SessionStatus::Aborted) {
            return error_reply(409, "InvalidState",
                               "session is already " + std::string(to_string(session.status)));
        }
        session.status = SessionStatus::Aborted;
        session.pending.reset();
        checkpoint(session, s->paths);
        return {200, json{{"status", to_string(session.status)}}, std::nullopt};
    } catch (const Error& e) {
        return error_reply(e);
    }
}

void AnnotationService::mount(httplib::Server& server) {
    server.set_default_headers({
        {"Access-Control-Allow-Origin", options_.cors_origin},
        {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
        {"Access-Control-Allow-Headers", "Content-Type"},
    });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    auto send = [](httplib::Response& res, const Reply& reply) {
        res.status = reply.status;
        if (reply.raw) {
            res.set_content(*reply.raw, "application/json");
        } else {
            res.set_content(reply.body.dump(), "application/json");
        }
    };
    auto parse = [](const httplib::Request& req) {
        return req.body.empty() ? json::object() : json::parse(req.body);
    };
    auto guarded = [send](auto handler) {
        return [send, handler](const httplib::Request& req, httplib::Response& res) {
            try {
                send(res, handler(req));
            } catch (const json::parse_error& e) {
                send(res, error_reply(400, "SchemaError", e.what()));
            } catch (const std::exception& e) {
                send(res, error_reply(500, "Internal", e.what()));
            }
        };
    };
    constexpr const char* kId = R"(/sessions/([A-Za-z0-9_-]+))";
    const std::string id_route = kId;

    server.Post("/sessions", guarded([this, parse](const httplib::Request& req) { return create_session(parse(req)); }));
    server.Get("/sessions", guarded([this](const httplib::Request&) { return list_sessions(); }));
    server.Get(id_route, guarded([this](const httplib::Request& req) { return get_session(req.matches[1]); }));
    server.Get(id_route + "/pending",
               guarded([this](const httplib::Request& req) { return get_pending(req.matches[1]); }));
    server.Post(id_route + "/annotations", guarded([this, parse](const httplib::Request& req) {
                    return post_annotation(req.matches[1], parse(req));
                }));
    server.Get(id_route + "/export",
               guarded([this](const httplib::Request& req) { return get_export(req.matches[1]); }));
    server.Get(id_route + "/uncertainty",
               guarded([this](const httplib::Request& req) { return get_uncertainty(req.matches[1]); }));
    server.Post(id_route + "/abort",
                guarded([this](const httplib::Request& req) { return abort_session(req.matches[1]); }));
}

} // namespace adaprompt
