// adaprompt: exemplar selection, evaluation and the annotation server.

#include "adaprompt/annotation_service.hpp"
#include "adaprompt/dataset.hpp"
#include "adaprompt/error.hpp"
#include "adaprompt/evaluation.hpp"
#include "adaprompt/mock_backend.hpp"
#include "adaprompt/openai_backend.hpp"
#include "adaprompt/parsing.hpp"
#include "adaprompt/selection.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace adaprompt;

namespace {

enum Exit { kOk = 0, kUsage = 2, kBackend = 3, kData = 4, kAborted = 5 };

struct Backends {
    std::shared_ptr<ModelBackend> model;
    std::shared_ptr<EmbeddingBackend> embedder;
};

/// "mock:<fixture.json>" or "openai" (configured from AP_BACKEND_*).
Backends open_backend(const std::string& choice) {
    if (choice.rfind("mock:", 0) == 0) {
        std::shared_ptr<ScriptedMock> mock = ScriptedMock::load(choice.substr(5));
        return {mock, mock};
    }
    if (choice == "openai") {
        auto client = std::make_shared<OpenAiBackend>(OpenAiConfig::from_env());
        return {client, client};
    }
    throw Error(ErrorCode::InvalidConfig, "unknown backend '" + choice + "' (use mock:<fixture> or openai)");
}

std::string backend_or_env(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* url = std::getenv("AP_BACKEND_URL"); url != nullptr && *url != '\0') return "openai";
    throw Error(ErrorCode::InvalidConfig, "--backend is required (or set AP_BACKEND_URL)");
}

std::optional<std::string> env(const char* name) {
    const char* value = std::getenv(name);
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
}

/// Session config with precedence flags > environment > config file > preset.
struct ConfigFlags {
    std::optional<std::size_t> k;
    std::optional<std::size_t> l;
    std::optional<std::size_t> pool_cap;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> metric;
    std::optional<std::string> strategy;
    std::optional<double> temperature;
    std::optional<std::size_t> max_in_flight;
    std::string config_file;
};

json env_overrides() {
    json j = json::object();
    auto number = [&](const char* name, const char* key) {
        if (auto v = env(name)) {
            try {
                j[key] = std::stoull(*v);
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be a non-negative integer");
            }
        }
    };
    number("AP_K", "budget_k");
    number("AP_L", "samples_l");
    number("AP_POOL_CAP", "pool_cap_s");
    number("AP_SEED", "seed");
    if (auto v = env("AP_METRIC")) j["metric"] = *v;
    if (auto v = env("AP_STRATEGY")) j["strategy"] = *v;
    return j;
}

json flag_overrides(const ConfigFlags& f) {
    json j = json::object();
    if (f.k) j["budget_k"] = *f.k;
    if (f.l) j["samples_l"] = *f.l;
    if (f.pool_cap) j["pool_cap_s"] = *f.pool_cap;
    if (f.seed) j["seed"] = *f.seed;
    if (f.metric) j["metric"] = *f.metric;
    if (f.strategy) j["strategy"] = *f.strategy;
    if (f.temperature) j["sampling_temperature"] = *f.temperature;
    if (f.max_in_flight) j["max_in_flight"] = *f.max_in_flight;
    return j;
}

SessionConfig resolve_config(const DatasetManifest& manifest, const ConfigFlags& flags) {
    auto config = manifest.preset_k ? SessionConfig::for_budget(*manifest.preset_k) : SessionConfig{};
    try {
        if (!flags.config_file.empty()) {
            config = config_from_json(json::parse(read_file(flags.config_file)), config);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, "config file: " + std::string(e.what()));
    }
    config = config_from_json(env_overrides(), config);
    config = config_from_json(flag_overrides(flags), config);
    validate_config(config);
    return config;
}

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--k", f.k, "Exemplar budget k");
    cmd->add_option("--l", f.l, "Samples per question when scoring");
    cmd->add_option("--pool-cap", f.pool_cap, "Candidate pool cap s (default 50k)");
    cmd->add_option("--seed", f.seed, "Seed for subsampling, random and k-means");
    cmd->add_option("--metric", f.metric, "disagreement | entropy")->check(CLI::IsMember({"disagreement", "entropy"}));
    cmd->add_option("--temperature", f.temperature, "Sampling temperature for scoring");
    cmd->add_option("--max-in-flight", f.max_in_flight, "Concurrent backend requests");
    cmd->add_option("--config", f.config_file, "JSON session config file")->check(CLI::ExistingFile);
}

// Interactive annotation on the terminal.
Annotator terminal_annotator(std::string annotator_id) {
    return [annotator_id = std::move(annotator_id)](const AnnotationRequest& request) {
        const auto& q = request.question;
        std::cout << "\n=== round " << request.round << ": " << q.id << " ===\n" << q.text << "\n";
        for (const auto& c : q.choices) std::cout << "  (" << c.label << ") " << c.text << "\n";
        if (request.report) {
            std::cout << "sampled answers:";
            for (const auto& [answer, count] : request.report->distribution.counts) {
                std::cout << "  " << (answer.valid ? answer.canonical : "<unparsed>") << " x" << count;
            }
            std::printf("\ndisagreement %.4f  entropy %.4f\n", request.report->disagreement, request.report->entropy);
        }
        auto aborted = [] { return Error(ErrorCode::AnnotationAborted, "annotation stopped; rerun to resume"); };
        std::cout << "Reasoning chain (end with an empty line, ':q' to stop):\n";
        std::string rationale;
        for (std::string line; std::getline(std::cin, line);) {
            if (line == ":q") throw aborted();
            if (line.empty()) {
                if (rationale.empty()) continue;
                break;
            }
            if (!rationale.empty()) rationale += ' ';
            rationale += line;
        }
        if (rationale.empty()) throw aborted();
        for (;;) {
            std::cout << "Answer: " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line) || line == ":q") throw aborted();
            auto answer = normalize_answer_text(line, q);
            if (answer.valid) {
                return AnnotationReply{q.id, rationale, std::move(answer), annotator_id};
            }
            std::cout << "Could not read a " << to_string(q.kind) << " answer from that; try again.\n";
        }
    };
}

ExemplarSet load_seed_exemplars(const std::string& path) {
    if (path.empty()) return {};
    return load_exemplar_file(path).exemplars;
}

void print_selection(const ExemplarSet& set) {
    for (const auto& e : set.exemplars) {
        std::cout << "round " << e.provenance.round << ": " << e.question.id;
        if (e.provenance.scores_at_selection) {
            std::printf(" (disagreement %.4f, entropy %.4f)", e.provenance.scores_at_selection->disagreement,
                        e.provenance.scores_at_selection->entropy);
            std::fflush(stdout);
        }
        std::cout << "\n";
    }
}

struct SelectArgs {
    std::string dataset;
    std::string strategy;
    ConfigFlags config;
    std::string backend;
    std::string annotator = "interactive";
    std::string annotator_id;
    std::string out;
    std::string seed_exemplars;
    std::string exemplars_in;
    std::string bind = "127.0.0.1";
    int port = 8080;
};

/// Serves the session in `paths` over HTTP until it completes or is aborted.
void annotate_over_http(const SessionPaths& paths, const std::shared_ptr<ModelBackend>& backend,
                        const SelectArgs& args) {
    AnnotationService::Options options;
    options.session_root = paths.dir.parent_path().empty() ? fs::path(".") : paths.dir.parent_path();
    options.backend = backend;
    AnnotationService service(std::move(options));
    const auto id = paths.dir.filename().string();
    service.adopt(id);
    httplib::Server server;
    service.mount(server);
    if (!server.bind_to_port(args.bind, args.port)) {
        throw Error(ErrorCode::InvalidConfig, "cannot listen on " + args.bind + ":" + std::to_string(args.port));
    }
    std::cout << "annotate session " << id << " at http://" << args.bind << ":" << args.port << "/sessions/" << id
              << std::endl;
    std::jthread listener([&] { server.listen_after_bind(); });
    for (;;) {
        const auto status = service.status_of(id);
        if (status == SessionStatus::Complete || status == SessionStatus::Aborted) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    server.stop();
    listener.join();
    service.wait_idle();
    if (service.status_of(id) == SessionStatus::Aborted) {
        throw Error(ErrorCode::AnnotationAborted, "session " + id + " was aborted");
    }
}

int run_select(const SelectArgs& args) {
    const auto manifest = load_manifest(args.dataset);
    auto flags = args.config;
    if (!args.strategy.empty()) flags.strategy = args.strategy;
    const auto config = resolve_config(manifest, flags);
    const auto train = load_pool_jsonl(manifest.train_path, PoolRole::Train);
    const SessionPaths paths{args.out};
    fs::create_directories(paths.dir);

    if (config.strategy == Strategy::Fixed) {
        if (args.exemplars_in.empty()) {
            throw Error(ErrorCode::InvalidConfig, "--strategy fixed needs --exemplars-in");
        }
        auto set = fixed_exemplars(args.exemplars_in);
        save_exemplar_file(paths.exemplar_file(), {manifest.name, "fixed", set});
        print_selection(set);
        return kOk;
    }
    if (config.strategy == Strategy::AutoCoT) {
        const auto backends = open_backend(backend_or_env(args.backend));
        ResponseCache cache(paths.cache_dir());
        auto set = auto_cot_select(train, config, *backends.model, *backends.embedder, cache);
        save_exemplar_file(paths.exemplar_file(), {manifest.name, "auto_cot", set});
        print_selection(set);
        return kOk;
    }

    Backends backends;
    if (config.strategy != Strategy::Random || !args.backend.empty()) {
        backends = open_backend(backend_or_env(args.backend));
    }
    const auto seeds = load_seed_exemplars(args.seed_exemplars);
    if (args.annotator == "http") {
        if (!fs::exists(paths.session_file())) {
            checkpoint(start_session(paths.dir.filename().string(), manifest.name, train, config, seeds), paths);
        }
        annotate_over_http(paths, backends.model, args);
        print_selection(load_session(paths).exemplar_set);
        return kOk;
    }
    std::string annotator_id = args.annotator_id;
    if (annotator_id.empty()) {
        annotator_id = args.annotator == "stub" ? "stub" : env("USER").value_or("human");
    }
    const auto annotator = args.annotator == "stub" ? stub_annotator(annotator_id) : terminal_annotator(annotator_id);
    const auto set =
        run_selection_in(paths, manifest.name, train, config, backends.model.get(), annotator, seeds);
    print_selection(set);
    return kOk;
}

struct EvaluateArgs {
    std::string exemplars;
    std::string test;
    std::string dataset;
    std::size_t votes = 6;
    std::size_t runs = 3;
    double temperature = 0.7;
    std::size_t max_in_flight = 4;
    std::string backend;
    std::string out;
};

QuestionPool load_test_pool(const std::string& test, const std::string& dataset) {
    if (!test.empty()) return load_pool_jsonl(test, PoolRole::Test);
    if (!dataset.empty()) return load_pool_jsonl(load_manifest(dataset).test_path, PoolRole::Test);
    throw Error(ErrorCode::InvalidConfig, "--test or --dataset is required");
}

std::string format_accuracy(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.3f", value);
    return buffer;
}

int run_evaluate(const EvaluateArgs& args) {
    const auto exemplars = load_exemplar_file(args.exemplars).exemplars;
    const auto test = load_test_pool(args.test, args.dataset);
    const auto backends = open_backend(backend_or_env(args.backend));
    EvalConfig config{args.votes, args.runs, args.temperature, args.max_in_flight};
    validate_eval_config(config);
    const fs::path out = args.out;
    fs::create_directories(out);
    ResponseCache cache(out / "cache");
    const auto result = evaluate(exemplars, test, *backends.model, config, cache);
    write_file_atomic(out / "eval.json", eval_result_to_json(result).dump(2) + "\n");
    write_file_atomic(out / "eval.csv", eval_result_csv(result));
    std::cout << "mean accuracy " << format_accuracy(result.mean_accuracy) << " over " << result.runs.size()
              << " run(s):";
    for (double a : result.run_accuracies) std::cout << ' ' << format_accuracy(a);
    std::cout << "\n";
    return kOk;
}

struct ScoreArgs {
    std::string dataset;
    std::string exemplars;
    ConfigFlags config;
    std::string backend;
    std::string cache_dir;
};

int run_score(const ScoreArgs& args) {
    const auto manifest = load_manifest(args.dataset);
    auto config = resolve_config(manifest, args.config);
    const auto pool = subsample_pool(load_pool_jsonl(manifest.train_path, PoolRole::Train), config.pool_cap_s,
                                     config.seed);
    const auto exemplars = load_seed_exemplars(args.exemplars);
    std::vector<Question> remaining;
    for (const auto& q : pool.questions) {
        if (!exemplars.contains(q.id)) remaining.push_back(q);
    }
    const auto backends = open_backend(backend_or_env(args.backend));
    const fs::path cache_dir = args.cache_dir.empty() ? fs::temp_directory_path() / "adaprompt-cache" : fs::path(args.cache_dir);
    ResponseCache cache(cache_dir);
    const auto reports = score_questions(*backends.model, exemplars, remaining, config, cache);
    const auto scored = scored_entries(reports);
    bool tie = false;
    const auto best = argmax_by_metric(scored, config.metric, &tie);
    std::cout << "question_id,disagreement,entropy,selected\n";
    for (std::size_t i = 0; i < scored.size(); ++i) {
        std::printf("%s,%.17g,%.17g,%s\n", scored[i].question_id.c_str(), scored[i].disagreement, scored[i].entropy,
                    i == best ? "true" : "false");
    }
    std::fflush(stdout);
    return kOk;
}

struct ServeArgs {
    std::string bind = "127.0.0.1";
    int port = 8080;
    std::string session_dir = "sessions";
    std::string datasets;
    std::string backend;
    std::string cors_origin = "*";
};

int run_serve(const ServeArgs& args) {
    AnnotationService::Options options;
    options.session_root = args.session_dir;
    options.datasets = DatasetRegistry::scan(args.datasets);
    options.backend = open_backend(backend_or_env(args.backend)).model;
    options.cors_origin = args.cors_origin;
    AnnotationService service(std::move(options));
    httplib::Server server;
    service.mount(server);
    if (!server.bind_to_port(args.bind, args.port)) {
        throw Error(ErrorCode::InvalidConfig, "cannot listen on " + args.bind + ":" + std::to_string(args.port));
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::jthread stopper([&] {
        int received = 0;
        sigwait(&signals, &received);
        server.stop();
    });
    std::cout << "listening on http://" << args.bind << ":" << args.port << std::endl;
    server.listen_after_bind();
    // listen returned on its own (not via a signal): release the waiting thread.
    pthread_kill(stopper.native_handle(), SIGTERM);
    return kOk;
}

struct SweepArgs {
    std::string dataset;
    std::string k_list = "1,2,4";
    std::string strategies = "adaptive,active,random";
    ConfigFlags config;
    std::string backend;
    std::size_t votes = 6;
    std::size_t runs = 1;
    std::string out;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream stream(text);
    for (std::string item; std::getline(stream, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int run_sweep(const SweepArgs& args) {
    const auto manifest = load_manifest(args.dataset);
    const auto train = load_pool_jsonl(manifest.train_path, PoolRole::Train);
    const auto test = load_pool_jsonl(manifest.test_path, PoolRole::Test);
    const auto backends = open_backend(backend_or_env(args.backend));
    const fs::path out = args.out;
    fs::create_directories(out);
    EvalConfig eval_config;
    eval_config.votes_per_question = args.votes;
    eval_config.runs = args.runs;
    ResponseCache eval_cache(out / "eval-cache");

    std::string csv = "k,strategy,accuracy\n";
    std::cout << "k,strategy,accuracy\n";
    for (const auto& k_text : split_list(args.k_list)) {
        std::size_t k = 0;
        try {
            k = std::stoull(k_text);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "bad --k-list entry '" + k_text + "'");
        }
        for (const auto& strategy : split_list(args.strategies)) {
            auto flags = args.config;
            flags.k = k;
            flags.strategy = strategy;
            if (!args.config.pool_cap) flags.pool_cap = 50 * k;
            const auto config = resolve_config(manifest, flags);
            const SessionPaths paths{out / ("k" + k_text + "-" + strategy)};
            ExemplarSet set;
            if (config.strategy == Strategy::AutoCoT) {
                ResponseCache cache(paths.cache_dir());
                set = auto_cot_select(train, config, *backends.model, *backends.embedder, cache);
                save_exemplar_file(paths.exemplar_file(), {manifest.name, "auto_cot", set});
            } else {
                set = run_selection_in(paths, manifest.name, train, config, backends.model.get(), stub_annotator());
            }
            const auto result = evaluate(set, test, *backends.model, eval_config, eval_cache);
            const auto row = std::to_string(k) + "," + std::string(to_string(config.strategy)) + "," +
                             format_accuracy(result.mean_accuracy) + "\n";
            csv += row;
            std::cout << row << std::flush;
        }
    }
    write_file_atomic(out / "sweep.csv", csv);
    return kOk;
}

int exit_code_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidConfig: return kUsage;
    case ErrorCode::AnnotationAborted: return kAborted;
    default: return kData;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uncertainty-driven chain-of-thought exemplar selection"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SelectArgs select;
    auto* select_cmd = app.add_subcommand("select", "Select and annotate k exemplars");
    select_cmd->add_option("--dataset", select.dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);
    select_cmd->add_option("--strategy", select.strategy, "adaptive | active | random | auto_cot | fixed")
        ->check(CLI::IsMember({"adaptive", "active", "random", "auto_cot", "fixed"}));
    add_config_flags(select_cmd, select.config);
    select_cmd->add_option("--backend", select.backend, "mock:<fixture.json> | openai");
    select_cmd->add_option("--annotator", select.annotator, "stub | interactive | http")
        ->check(CLI::IsMember({"stub", "interactive", "http"}));
    select_cmd->add_option("--annotator-id", select.annotator_id, "Recorded with every exemplar");
    select_cmd->add_option("--out", select.out, "Session directory")->required();
    select_cmd->add_option("--seed-exemplars", select.seed_exemplars, "Exemplar file prepended while scoring")
        ->check(CLI::ExistingFile);
    select_cmd->add_option("--exemplars-in", select.exemplars_in, "Exemplar file for --strategy fixed");
    select_cmd->add_option("--bind", select.bind, "Address for --annotator http");
    select_cmd->add_option("--port", select.port, "Port for --annotator http");

    EvaluateArgs evaluate_args;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Self-consistency accuracy on a test pool");
    evaluate_cmd->add_option("--exemplars", evaluate_args.exemplars, "Exemplar file")->required();
    evaluate_cmd->add_option("--test", evaluate_args.test, "Test pool JSONL");
    evaluate_cmd->add_option("--dataset", evaluate_args.dataset, "Manifest whose test pool to use");
    evaluate_cmd->add_option("--votes", evaluate_args.votes, "Votes per question")->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--runs", evaluate_args.runs, "Repeated runs")->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--temperature", evaluate_args.temperature, "Sampling temperature");
    evaluate_cmd->add_option("--max-in-flight", evaluate_args.max_in_flight, "Concurrent requests")
        ->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--backend", evaluate_args.backend, "mock:<fixture.json> | openai");
    evaluate_cmd->add_option("--out", evaluate_args.out, "Output directory")->required();

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Print one uncertainty table");
    score_cmd->add_option("--dataset", score.dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--exemplars", score.exemplars, "Exemplar file used as context (default none)")
        ->check(CLI::ExistingFile);
    add_config_flags(score_cmd, score.config);
    score_cmd->add_option("--backend", score.backend, "mock:<fixture.json> | openai");
    score_cmd->add_option("--cache-dir", score.cache_dir, "Response cache directory");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
    serve_cmd->add_option("--bind", serve.bind, "Bind address");
    serve_cmd->add_option("--port", serve.port, "Port");
    serve_cmd->add_option("--session-dir", serve.session_dir, "Session root directory");
    serve_cmd->add_option("--datasets", serve.datasets, "Manifest file or directory of manifests")->required();
    serve_cmd->add_option("--backend", serve.backend, "mock:<fixture.json> | openai");
    serve_cmd->add_option("--cors-origin", serve.cors_origin, "Access-Control-Allow-Origin value");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep-k", "select + evaluate for each k and strategy (stub annotator)");
    sweep_cmd->add_option("--dataset", sweep.dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--k-list", sweep.k_list, "Comma-separated budgets");
    sweep_cmd->add_option("--strategies", sweep.strategies, "Comma-separated strategies");
    add_config_flags(sweep_cmd, sweep.config);
    sweep_cmd->add_option("--backend", sweep.backend, "mock:<fixture.json> | openai");
    sweep_cmd->add_option("--votes", sweep.votes, "Votes per question")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--runs", sweep.runs, "Evaluation runs per point")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*select_cmd) return run_select(select);
        if (*evaluate_cmd) return run_evaluate(evaluate_args);
        if (*score_cmd) return run_score(score);
        if (*serve_cmd) return run_serve(serve);
        if (*sweep_cmd) return run_sweep(sweep);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_of(e.code());
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
