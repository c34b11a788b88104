#pragma once

#include "litpipe/error.hpp"
#include "litpipe/pipeline.hpp"

#include <memory>
#include <optional>
#include <string>

namespace litpipe {

/// Body of every non-2xx response.
struct ApiError {
    int status = 500;
    std::string code;  // an ErrorCode name, or "Internal"
    std::string message;
    std::optional<std::string> stage;
    std::optional<std::size_t> position;  // SyntaxError
    std::optional<double> retry_after;    // RateLimited
};

void to_json(json& j, const ApiError& v);

int http_status_for(ErrorCode code);
ApiError api_error_from(const Error& error);

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8787;
    std::string cors_origin = "*";
};

/// POST /v1/sessions, GET /v1/sessions/{id}, GET /v1/sessions/{id}/papers,
/// POST /v1/sessions/{id}/drafts.
class ApiServer {
public:
    ApiServer(std::shared_ptr<Pipeline> pipeline, PipelineConfig defaults, ServiceOptions options = {});
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Blocks until stop().
    bool listen();
    /// Binds (port 0 picks a free one) and serves on a background thread;
    /// returns the bound port.
    int start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace litpipe
