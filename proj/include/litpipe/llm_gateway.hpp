#pragma once

#include "litpipe/transport.hpp"

#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

// =============================================================================
// Prompt templates
// =============================================================================

/// Body with `{name}` placeholders. Every placeholder must be declared.
struct PromptTemplate {
    std::string template_id;
    std::string version;
    std::string body;
    std::set<std::string> variables;
};

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view body);

/// Exact substitution, no escaping or trimming. Throws UnknownPlaceholder for
/// an undeclared placeholder and MissingVariable for an unbound one.
std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars);

// =============================================================================
// Requests and exchanges
// =============================================================================

struct LlmRequest {
    std::string model_name;
    std::optional<std::string> system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::string template_id = "adhoc";
    std::string template_version = "0";

    bool operator==(const LlmRequest&) const = default;

    void validate() const;
};

struct LlmExchange {
    std::string id;
    LlmRequest request;
    std::string response_text;  // verbatim
    double latency_ms = 0.0;
    std::string provider;
    std::string timestamp;  // ISO-8601 UTC
    std::string cassette_key;

    bool operator==(const LlmExchange&) const = default;
};

/// Stable key over template id/version, rendered prompt, model and temperature.
std::string llm_cassette_key(const LlmRequest& request);

/// The synthetic cassette request ({method,url,body}) describing an LLM call.
CassetteEntry llm_cassette_request(const LlmRequest& request);

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// ceil(len / 4)
std::size_t estimate_tokens(std::string_view text);

// =============================================================================
// Backends
// =============================================================================

struct BackendReply {
    std::string text;
    double latency_ms = 0.0;
    std::string provider;
    std::optional<std::string> timestamp;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual BackendReply complete(const LlmRequest& request) = 0;
};

struct LiveLlmOptions {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::optional<std::string> api_key;  // defaults to $LITPIPE_LLM_API_KEY
    std::chrono::seconds timeout{120};
};

/// Any OpenAI-compatible chat-completion endpoint.
class LiveLlmBackend final : public LlmBackend {
public:
    explicit LiveLlmBackend(LiveLlmOptions options, std::shared_ptr<Transport> transport = nullptr);
    BackendReply complete(const LlmRequest& request) override;

private:
    LiveLlmOptions options_;
    std::shared_ptr<Transport> transport_;
};

class ReplayLlmBackend final : public LlmBackend {
public:
    explicit ReplayLlmBackend(std::shared_ptr<const CassetteStore> store) : store_(std::move(store)) {}
    BackendReply complete(const LlmRequest& request) override;

private:
    std::shared_ptr<const CassetteStore> store_;
};

/// Ordered canned responses, for unit tests.
class ScriptedLlmBackend final : public LlmBackend {
public:
    explicit ScriptedLlmBackend(std::vector<std::string> responses);
    BackendReply complete(const LlmRequest& request) override;

    std::vector<LlmRequest> requests() const;
    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::string> responses_;
    std::vector<LlmRequest> seen_;
};

class RecordingLlmBackend final : public LlmBackend {
public:
    RecordingLlmBackend(std::shared_ptr<LlmBackend> inner, std::shared_ptr<CassetteStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}
    BackendReply complete(const LlmRequest& request) override;

private:
    std::shared_ptr<LlmBackend> inner_;
    std::shared_ptr<CassetteStore> store_;
};

// =============================================================================
// Gateway
// =============================================================================

/// Append-only log of exchanges.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(const std::vector<LlmExchange>& existing) : entries_(existing.begin(), existing.end()) {}

    /// Assigns the next "ex-NNNN" id and appends.
    std::string append(LlmExchange exchange);
    std::vector<LlmExchange> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::deque<LlmExchange> entries_;
};

struct GatewayOptions {
    std::size_t context_limit_tokens = 8192;
    std::map<std::string, std::size_t> model_context_limits;
    TokenEstimator estimator = estimate_tokens;

    std::size_t context_limit(const std::string& model) const;
};

class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmBackend> backend, GatewayOptions options, std::shared_ptr<AuditLog> audit);

    /// Validates, checks the token budget, calls the backend and appends the
    /// exchange to the audit log.
    LlmExchange complete(const LlmRequest& request);

    /// As complete() but leaves the exchange out of the audit log; callers
    /// running requests concurrently use it and then record() in a fixed order.
    LlmExchange call(const LlmRequest& request) const;
    LlmExchange record(LlmExchange exchange);

    std::size_t estimate(std::string_view text) const { return options_.estimator(text); }
    std::size_t context_limit(const std::string& model) const { return options_.context_limit(model); }
    const std::shared_ptr<AuditLog>& audit() const { return audit_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    GatewayOptions options_;
    std::shared_ptr<AuditLog> audit_;
};

std::string utc_timestamp_now();

}  // namespace litpipe
