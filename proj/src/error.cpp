#include "adaprompt/error.hpp"

namespace adaprompt {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BudgetExceedsPool: return "BudgetExceedsPool";
    case ErrorCode::AnnotationAborted: return "AnnotationAborted";
    case ErrorCode::InvalidAnnotation: return "InvalidAnnotation";
    case ErrorCode::DegenerateClustering: return "DegenerateClustering";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::InvalidState: return "InvalidState";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

std::string_view to_string(BackendErrorKind kind) {
    switch (kind) {
    case BackendErrorKind::Network: return "Network";
    case BackendErrorKind::RateLimited: return "RateLimited";
    case BackendErrorKind::ServerError: return "ServerError";
    case BackendErrorKind::MalformedReply: return "MalformedReply";
    case BackendErrorKind::AuthFailed: return "AuthFailed";
    }
    return "Unknown";
}

BackendError::BackendError(BackendErrorKind kind, bool retryable, const std::string& detail)
    : std::runtime_error("BackendError(" + std::string(to_string(kind)) + "): " + detail),
      kind_(kind),
      retryable_(retryable) {}

BackendError BackendError::make(BackendErrorKind kind, const std::string& detail) {
    const bool retryable = kind == BackendErrorKind::Network || kind == BackendErrorKind::RateLimited ||
                           kind == BackendErrorKind::ServerError;
    return {kind, retryable, detail};
}

} // namespace adaprompt
