#include "litpipe/error.hpp"

namespace litpipe {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::EmptyAbstract: return "EmptyAbstract";
    case ErrorCode::InvalidSeed: return "InvalidSeed";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::UpstreamError: return "UpstreamError";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::LlmFailure: return "LlmFailure";
    case ErrorCode::TooManyCandidates: return "TooManyCandidates";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::IncompleteVerdictSet: return "IncompleteVerdictSet";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::PlanLineOutOfRange: return "PlanLineOutOfRange";
    case ErrorCode::DuplicateDirective: return "DuplicateDirective";
    case ErrorCode::PlanContextMismatch: return "PlanContextMismatch";
    case ErrorCode::NoCandidatesFound: return "NoCandidatesFound";
    case ErrorCode::CorruptSession: return "CorruptSession";
    }
    return "Unknown";
}

void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace litpipe
