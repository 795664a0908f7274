#pragma once

#include "adaprompt/domain.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace adaprompt {

/// One question per line: {"id", "question", "kind", "choices"?, "answer"?}.
/// Blank lines are skipped. Throws Error(SchemaError) with the line number.
QuestionPool load_pool_jsonl(const std::filesystem::path& path, PoolRole role);
std::string dump_pool_jsonl(const QuestionPool& pool);

/// Dataset manifest JSON: {"name", "task_kind", "train_path", "test_path", "preset_k"?}.
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
    std::string name;
    TaskKind task_kind = TaskKind::Numeric;
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    /// From the manifest, else the built-in table for known benchmark names.
    std::optional<std::size_t> preset_k;
};

DatasetManifest load_manifest(const std::filesystem::path& path);

} // namespace adaprompt
