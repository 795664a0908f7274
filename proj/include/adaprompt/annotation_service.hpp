#pragma once

#include "adaprompt/backend.hpp"
#include "adaprompt/dataset.hpp"
#include "adaprompt/session.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace adaprompt {

/// Datasets a service can open sessions on, by manifest name.
class DatasetRegistry {
public:
    void add(DatasetManifest manifest);
    /// Every *.json manifest directly under `directory`, or a single manifest file.
    static DatasetRegistry scan(const std::filesystem::path& path);

    [[nodiscard]] const DatasetManifest* find(const std::string& name) const;
    [[nodiscard]] std::vector<std::string> names() const;

private:
    std::map<std::string, DatasetManifest> manifests_;
};

/// JSON-over-HTTP front end to selection sessions.
///
///   POST /sessions                       {dataset, config} -> 201 {id, status}
///   GET  /sessions                       {sessions: [view, ...]}
///   GET  /sessions/{id}                  view
///   GET  /sessions/{id}/pending          annotation request
///   POST /sessions/{id}/annotations      {question_id, rationale, answer, annotator_id}
///   GET  /sessions/{id}/export           exemplars.json, byte for byte
///   GET  /sessions/{id}/uncertainty      latest round's score table
///   POST /sessions/{id}/abort
///
/// Errors are {code, message}. Scoring runs on a background thread per
/// session; every mutation of a session happens under that session's lock.
class AnnotationService {
public:
    struct Options {
        std::filesystem::path session_root;
        DatasetRegistry datasets;
        std::shared_ptr<ModelBackend> backend;
        /// Value of Access-Control-Allow-Origin.
        std::string cors_origin = "*";
        /// Score inside the request handler instead of in the background.
        bool synchronous_scoring = false;
    };

    explicit AnnotationService(Options options);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    void mount(httplib::Server& server);

    /// Serves a session created outside the service (the CLI's http annotator).
    void adopt(const std::string& id);
    /// Blocks until no background scoring is running.
    void wait_idle();
    [[nodiscard]] SessionStatus status_of(const std::string& id);

    struct Reply {
        int status = 200;
        json body;
        /// Raw payload sent instead of `body` when set (export).
        std::optional<std::string> raw;
    };

    Reply create_session(const json& body);
    Reply list_sessions();
    Reply get_session(const std::string& id);
    Reply get_pending(const std::string& id);
    Reply post_annotation(const std::string& id, const json& body);
    Reply get_export(const std::string& id);
    Reply get_uncertainty(const std::string& id);
    Reply abort_session(const std::string& id);

private:
    struct Live;

    std::shared_ptr<Live> live(const std::string& id);
    void start_scoring(const std::shared_ptr<Live>& session);
    json view_of(const Live& session) const;

    Options options_;
    SessionStore store_;
    std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Live>> sessions_;
};

} // namespace adaprompt
