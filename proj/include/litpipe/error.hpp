#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace litpipe {

enum class ErrorCode {
    InvalidArgument,
    EmptyQuery,
    EmptyAbstract,
    InvalidSeed,
    RateLimited,
    UpstreamError,
    DecodeError,
    NotFound,
    MissingVariable,
    UnknownPlaceholder,
    ProviderError,
    BudgetExceeded,
    Timeout,
    CassetteMiss,
    LlmFailure,
    TooManyCandidates,
    Unparseable,
    IncompleteVerdictSet,
    SyntaxError,
    PlanLineOutOfRange,
    DuplicateDirective,
    PlanContextMismatch,
    NoCandidatesFound,
    CorruptSession,
};

std::string_view to_string(ErrorCode code);

/// Exception type used across the library. Carries a machine-readable code,
/// the pipeline stage that raised it (when known) and a few code-specific
/// payload fields.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    const std::optional<std::string>& stage() const noexcept { return stage_; }
    Error& with_stage(std::string stage) {
        stage_ = std::move(stage);
        return *this;
    }

    // RateLimited: seconds suggested by the upstream Retry-After header.
    std::optional<double> retry_after;
    // SyntaxError: byte offset into the parsed text.
    std::optional<std::size_t> position;
    // UpstreamError / ProviderError: HTTP status.
    std::optional<int> http_status;
    // PlanLineOutOfRange, MissingVariable, CassetteMiss, ...: offending item.
    std::optional<std::string> subject;

private:
    ErrorCode code_;
    std::optional<std::string> stage_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace litpipe
