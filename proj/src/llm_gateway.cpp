#include "litpipe/llm_gateway.hpp"

#include "litpipe/error.hpp"
#include "litpipe/text.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <ctime>

namespace litpipe {

using nlohmann::json;

// =============================================================================
// Templates
// =============================================================================

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Calls `on_text(literal)` and `on_var(name)` in document order. Only
/// `{identifier}` is a placeholder; any other brace is literal text.
template <typename OnText, typename OnVar>
void scan_template(std::string_view body, OnText&& on_text, OnVar&& on_var) {
    std::size_t i = 0;
    std::size_t literal_start = 0;
    while (i < body.size()) {
        if (body[i] == '{' && i + 1 < body.size() && is_ident_start(body[i + 1])) {
            std::size_t j = i + 1;
            while (j < body.size() && is_ident(body[j])) ++j;
            if (j < body.size() && body[j] == '}') {
                on_text(body.substr(literal_start, i - literal_start));
                on_var(body.substr(i + 1, j - i - 1));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        ++i;
    }
    on_text(body.substr(literal_start));
}

}  // namespace

std::vector<std::string> placeholders(std::string_view body) {
    std::vector<std::string> names;
    scan_template(
        body, [](std::string_view) {},
        [&](std::string_view name) {
            if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
        });
    return names;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    scan_template(
        tmpl.body, [&](std::string_view literal) { out.append(literal); },
        [&](std::string_view name) {
            std::string key(name);
            if (!tmpl.variables.contains(key)) {
                Error e(ErrorCode::UnknownPlaceholder,
                        "template " + tmpl.template_id + " uses undeclared placeholder {" + key + "}");
                e.subject = key;
                throw e;
            }
            auto it = vars.find(key);
            if (it == vars.end()) {
                Error e(ErrorCode::MissingVariable, "no value for placeholder {" + key + "}");
                e.subject = key;
                throw e;
            }
            out.append(it->second);
        });
    return out;
}

// =============================================================================
// Requests
// =============================================================================

void LlmRequest::validate() const {
    if (model_name.empty()) fail(ErrorCode::InvalidArgument, "LLM request has no model name");
    if (user_text.empty()) fail(ErrorCode::InvalidArgument, "LLM request has empty user text");
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        fail(ErrorCode::InvalidArgument, "temperature must lie within [0, 2]");
    }
    if (max_output_tokens <= 0) fail(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
}

CassetteEntry llm_cassette_request(const LlmRequest& request) {
    json key_material = {
        {"template_id", request.template_id},
        {"version", request.template_version},
        {"model", request.model_name},
        {"temperature", request.temperature},
        {"system", request.system_text ? json(*request.system_text) : json(nullptr)},
        {"prompt", request.user_text},
    };
    CassetteEntry entry;
    entry.method = "POST";
    entry.url = "llm://chat/" + request.template_id + "/" + request.template_version;
    entry.body = key_material.dump();
    return entry;
}

std::string llm_cassette_key(const LlmRequest& request) {
    auto entry = llm_cassette_request(request);
    return cassette_key(entry.method, entry.url, entry.body);
}

std::size_t estimate_tokens(std::string_view text) {
    return (text.size() + 3) / 4;
}

std::string utc_timestamp_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// =============================================================================
// Backends
// =============================================================================

LiveLlmBackend::LiveLlmBackend(LiveLlmOptions options, std::shared_ptr<Transport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {
    if (!transport_) transport_ = std::make_shared<LiveTransport>(options_.timeout);
    if (!options_.api_key) {
        if (const char* env = std::getenv("LITPIPE_LLM_API_KEY"); env && *env) options_.api_key = env;
    }
}

BackendReply LiveLlmBackend::complete(const LlmRequest& request) {
    json messages = json::array();
    if (request.system_text) messages.push_back({{"role", "system"}, {"content", *request.system_text}});
    messages.push_back({{"role", "user"}, {"content", request.user_text}});
    json body = {
        {"model", request.model_name},
        {"messages", messages},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };

    HttpRequest http;
    http.method = "POST";
    http.base_url = options_.base_url;
    http.target = options_.path;
    http.body = body.dump();
    http.content_type = "application/json";
    if (options_.api_key) http.headers.emplace_back("Authorization", "Bearer " + *options_.api_key);

    auto started = std::chrono::steady_clock::now();
    HttpResponse response = transport_->send(http);
    double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    if (response.status == 429) {
        Error e(ErrorCode::RateLimited, "chat completion rate limited (HTTP 429)");
        e.http_status = 429;
        if (auto ra = response.header("retry-after")) {
            try {
                e.retry_after = std::stod(*ra);
            } catch (const std::exception&) {
            }
        }
        throw e;
    }
    if (response.status < 200 || response.status >= 300) {
        Error e(ErrorCode::ProviderError, "chat completion returned HTTP " + std::to_string(response.status));
        e.http_status = response.status;
        throw e;
    }
    json doc = json::parse(response.body, nullptr, false);
    try {
        if (doc.is_discarded()) throw std::runtime_error("not JSON");
        std::string content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        return BackendReply{std::move(content), latency, "openai-compatible:" + options_.base_url, std::nullopt};
    } catch (const std::exception& ex) {
        fail(ErrorCode::ProviderError, std::string("malformed chat completion response: ") + ex.what());
    }
}

BackendReply ReplayLlmBackend::complete(const LlmRequest& request) {
    auto key = llm_cassette_key(request);
    auto entry = store_->find(key);
    if (!entry) {
        Error e(ErrorCode::CassetteMiss,
                "no cassette for LLM request " + request.template_id + "/" + request.template_version + " (key " +
                    key + ")");
        e.subject = key;
        throw e;
    }
    BackendReply reply;
    reply.text = entry->response.body;
    reply.provider = entry->response.header("x-provider").value_or("replay");
    reply.timestamp = entry->response.header("x-recorded-at");
    if (auto latency = entry->response.header("x-latency-ms")) {
        try {
            reply.latency_ms = std::stod(*latency);
        } catch (const std::exception&) {
        }
    }
    return reply;
}

ScriptedLlmBackend::ScriptedLlmBackend(std::vector<std::string> responses)
    : responses_(responses.begin(), responses.end()) {}

BackendReply ScriptedLlmBackend::complete(const LlmRequest& request) {
    std::lock_guard lock(mutex_);
    seen_.push_back(request);
    if (responses_.empty()) fail(ErrorCode::ProviderError, "scripted backend has no responses left");
    std::string text = std::move(responses_.front());
    responses_.pop_front();
    return BackendReply{std::move(text), 0.0, "scripted", "1970-01-01T00:00:00Z"};
}

std::vector<LlmRequest> ScriptedLlmBackend::requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

std::size_t ScriptedLlmBackend::remaining() const {
    std::lock_guard lock(mutex_);
    return responses_.size();
}

BackendReply RecordingLlmBackend::complete(const LlmRequest& request) {
    BackendReply reply = inner_->complete(request);
    if (!reply.timestamp) reply.timestamp = utc_timestamp_now();

    CassetteEntry entry = llm_cassette_request(request);
    entry.response.status = 200;
    entry.response.body = reply.text;
    entry.response.headers["x-provider"] = reply.provider;
    entry.response.headers["x-recorded-at"] = *reply.timestamp;
    char latency[32];
    std::snprintf(latency, sizeof(latency), "%.1f", reply.latency_ms);
    entry.response.headers["x-latency-ms"] = latency;
    store_->write(entry, "llm-" + request.template_id);
    return reply;
}

// =============================================================================
// Gateway
// =============================================================================

std::string AuditLog::append(LlmExchange exchange) {
    std::lock_guard lock(mutex_);
    char id[16];
    std::snprintf(id, sizeof(id), "ex-%04zu", entries_.size() + 1);
    exchange.id = id;
    entries_.push_back(std::move(exchange));
    return entries_.back().id;
}

std::vector<LlmExchange> AuditLog::snapshot() const {
    std::lock_guard lock(mutex_);
    return {entries_.begin(), entries_.end()};
}

std::size_t AuditLog::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t GatewayOptions::context_limit(const std::string& model) const {
    auto it = model_context_limits.find(model);
    return it == model_context_limits.end() ? context_limit_tokens : it->second;
}

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, GatewayOptions options, std::shared_ptr<AuditLog> audit)
    : backend_(std::move(backend)), options_(std::move(options)), audit_(std::move(audit)) {
    if (!audit_) audit_ = std::make_shared<AuditLog>();
    if (!options_.estimator) options_.estimator = estimate_tokens;
}

LlmExchange LlmGateway::call(const LlmRequest& request) const {
    request.validate();

    std::size_t prompt_tokens = options_.estimator(request.user_text);
    if (request.system_text) prompt_tokens += options_.estimator(*request.system_text);
    std::size_t limit = options_.context_limit(request.model_name);
    if (prompt_tokens > limit) {
        Error e(ErrorCode::BudgetExceeded, "prompt needs ~" + std::to_string(prompt_tokens) +
                                               " tokens; context limit of " + request.model_name + " is " +
                                               std::to_string(limit));
        e.subject = request.model_name;
        throw e;
    }

    BackendReply reply = backend_->complete(request);

    LlmExchange exchange;
    exchange.request = request;
    exchange.response_text = std::move(reply.text);
    exchange.latency_ms = reply.latency_ms;
    exchange.provider = reply.provider;
    exchange.timestamp = reply.timestamp.value_or(utc_timestamp_now());
    exchange.cassette_key = llm_cassette_key(request);
    return exchange;
}

LlmExchange LlmGateway::record(LlmExchange exchange) {
    exchange.id = audit_->append(exchange);
    spdlog::debug("llm exchange {} ({}/{}) {} chars", exchange.id, exchange.request.template_id,
                  exchange.request.template_version, exchange.response_text.size());
    return exchange;
}

LlmExchange LlmGateway::complete(const LlmRequest& request) {
    return record(call(request));
}

}  // namespace litpipe
