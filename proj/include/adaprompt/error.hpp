#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adaprompt {

enum class ErrorCode {
    EmptyPool,
    EmptySample,
    SchemaError,
    InvalidConfig,
    BudgetExceedsPool,
    AnnotationAborted,
    InvalidAnnotation,
    DegenerateClustering,
    CorruptCheckpoint,
    UnknownSession,
    InvalidState,
};

std::string_view to_string(ErrorCode code);

/// Typed failure raised by every module. The code is stable and is what the
/// CLI and the HTTP service map to exit codes / response codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

enum class BackendErrorKind { Network, RateLimited, ServerError, MalformedReply, AuthFailed };

std::string_view to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorKind kind, bool retryable, const std::string& detail);

    /// Network and RateLimited are always retryable; AuthFailed never is.
    static BackendError make(BackendErrorKind kind, const std::string& detail);

    [[nodiscard]] BackendErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

private:
    BackendErrorKind kind_;
    bool retryable_;
};

} // namespace adaprompt
