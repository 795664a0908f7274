#include "adaprompt/dataset.hpp"

#include "adaprompt/error.hpp"
#include "adaprompt/json_io.hpp"

#include <fstream>

namespace adaprompt {

QuestionPool load_pool_jsonl(const std::filesystem::path& path, PoolRole role) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::SchemaError, "cannot open dataset file '" + path.string() + "'");
    }
    QuestionPool pool;
    pool.role = role;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            pool.questions.push_back(question_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate_pool(pool);
    return pool;
}

std::string dump_pool_jsonl(const QuestionPool& pool) {
    std::string out;
    for (const auto& q : pool.questions) {
        out += question_to_json(q).dump();
        out += '\n';
    }
    return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, "manifest '" + path.string() + "' is not JSON: " + e.what());
    } catch (const std::system_error&) {
        throw Error(ErrorCode::SchemaError, "cannot read manifest '" + path.string() + "'");
    }
    try {
        DatasetManifest m;
        m.name = j.at("name").get<std::string>();
        const auto kind = task_kind_from_string(j.at("task_kind").get<std::string>());
        if (!kind) {
            throw Error(ErrorCode::SchemaError, "manifest task_kind is unknown");
        }
        m.task_kind = *kind;
        const auto base = path.parent_path();
        auto resolve = [&](const std::string& p) {
            std::filesystem::path candidate(p);
            return candidate.is_relative() ? base / candidate : candidate;
        };
        m.train_path = resolve(j.at("train_path").get<std::string>());
        m.test_path = resolve(j.at("test_path").get<std::string>());
        if (j.contains("preset_k") && !j.at("preset_k").is_null()) {
            m.preset_k = j.at("preset_k").get<std::size_t>();
        } else {
            m.preset_k = preset_budget(m.name);
        }
        for (const auto& p : {m.train_path, m.test_path}) {
            if (!std::filesystem::exists(p)) {
                throw Error(ErrorCode::SchemaError, "dataset file '" + p.string() + "' does not exist");
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, "malformed manifest '" + path.string() + "': " + e.what());
    }
}

} // namespace adaprompt
