#pragma once

#include "adaprompt/domain.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace adaprompt {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// Dataset line: {"id", "question", "kind", "choices"?, "answer"?}
json question_to_json(const Question& question);
/// Throws Error(SchemaError). `choices` may be an array of strings (labelled
/// A, B, ...) or of {"label", "text"} objects; `answer` a string or number.
Question question_from_json(const json& j);

json answer_to_json(const NormalizedAnswer& answer);
NormalizedAnswer answer_from_json(const json& j, const Question& question);

json scores_to_json(const SelectionScores& scores);
SelectionScores scores_from_json(const json& j);

json exemplar_to_json(const Exemplar& exemplar);
Exemplar exemplar_from_json(const json& j);

json config_to_json(const SessionConfig& config);
/// Missing fields keep the values already in `base`.
SessionConfig config_from_json(const json& j, SessionConfig base);

/// On-disk exemplar file: {version, dataset, strategy, exemplars: [...]}.
struct ExemplarFile {
    std::string dataset;
    std::string strategy;
    ExemplarSet exemplars;

    friend bool operator==(const ExemplarFile&, const ExemplarFile&) = default;
};

std::string dump_exemplar_file(const ExemplarFile& file);
ExemplarFile parse_exemplar_file(const std::string& text);
/// Throws Error(SchemaError) when the file is missing or malformed.
ExemplarFile load_exemplar_file(const std::filesystem::path& path);
void save_exemplar_file(const std::filesystem::path& path, const ExemplarFile& file);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace adaprompt
