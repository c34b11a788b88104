#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

namespace litpipe {

struct HttpRequest {
    std::string method = "GET";
    std::string base_url;  // scheme://host[:port]
    std::string target;    // path plus already-encoded query string
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::string content_type;

    std::string url() const { return base_url + target; }
    std::optional<std::string> header(std::string_view name) const;
};

struct HttpResponse {
    int status = 0;
    std::map<std::string, std::string> headers;  // lowercase names
    std::string body;

    std::optional<std::string> header(std::string_view name) const;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// Real HTTP(S) over cpp-httplib. The request target is sent verbatim.
class LiveTransport final : public Transport {
public:
    explicit LiveTransport(std::chrono::seconds timeout = std::chrono::seconds(60))
        : timeout_(timeout) {}
    HttpResponse send(const HttpRequest& request) override;

private:
    std::chrono::seconds timeout_;
};

/// Adapts a callable; used by tests and fixture generators.
class FunctionTransport final : public Transport {
public:
    using Handler = std::function<HttpResponse(const HttpRequest&)>;
    explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
    HttpResponse send(const HttpRequest& request) override { return handler_(request); }

private:
    Handler handler_;
};

struct RetryPolicy {
    int max_retries = 3;
    double base_seconds = 1.0;
    double factor = 2.0;
    double jitter_fraction = 0.25;
    std::uint64_t jitter_seed = 0x5eed;

    static bool retryable(int status) { return status == 429 || status >= 500; }
};

/// Produces the wait before each retry. Delays never decrease, and a
/// Retry-After hint is treated as a lower bound.
class BackoffSchedule {
public:
    explicit BackoffSchedule(const RetryPolicy& policy)
        : policy_(policy), rng_(policy.jitter_seed) {}

    double next(std::optional<double> retry_after = std::nullopt);
    int attempts() const { return attempt_; }

private:
    RetryPolicy policy_;
    std::mt19937_64 rng_;
    int attempt_ = 0;
    double previous_ = 0.0;
};

class RetryingTransport final : public Transport {
public:
    using Sleeper = std::function<void(double seconds)>;

    RetryingTransport(std::shared_ptr<Transport> inner, RetryPolicy policy, Sleeper sleeper = {});
    HttpResponse send(const HttpRequest& request) override;

private:
    std::shared_ptr<Transport> inner_;
    RetryPolicy policy_;
    Sleeper sleeper_;
};

/// Serializes request admission: consecutive admissions are at least
/// `interval` apart.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::milliseconds interval_;
    std::optional<std::chrono::steady_clock::time_point> next_slot_;
};

class RateLimitedTransport final : public Transport {
public:
    RateLimitedTransport(std::shared_ptr<Transport> inner, std::shared_ptr<RateLimiter> limiter)
        : inner_(std::move(inner)), limiter_(std::move(limiter)) {}
    HttpResponse send(const HttpRequest& request) override {
        limiter_->acquire();
        return inner_->send(request);
    }

private:
    std::shared_ptr<Transport> inner_;
    std::shared_ptr<RateLimiter> limiter_;
};

// ---------------------------------------------------------------------------
// Cassettes: one JSON document per recorded exchange
//   {request:{method,url,body}, response:{status,headers,body}}
// ---------------------------------------------------------------------------

struct CassetteEntry {
    std::string method;
    std::string url;
    std::string body;
    HttpResponse response;
};

/// Canonical key over method, path, query and body. Scheme, host and
/// headers are excluded so recordings replay against any base URL and never
/// depend on credentials.
std::string cassette_key(std::string_view method, std::string_view url, std::string_view body);

class CassetteStore {
public:
    explicit CassetteStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    /// Re-reads every *.json file in the directory.
    void reload();
    std::optional<CassetteEntry> find(const std::string& key) const;
    std::size_t size() const;

    /// Writes the entry as `<name_hint>-<key prefix>.json`; returns the key.
    std::string write(const CassetteEntry& entry, const std::string& name_hint);

private:
    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, CassetteEntry> entries_;
};

class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(std::shared_ptr<const CassetteStore> store) : store_(std::move(store)) {}
    HttpResponse send(const HttpRequest& request) override;

private:
    std::shared_ptr<const CassetteStore> store_;
};

class RecordingTransport final : public Transport {
public:
    RecordingTransport(std::shared_ptr<Transport> inner, std::shared_ptr<CassetteStore> store,
                       std::string name_hint)
        : inner_(std::move(inner)), store_(std::move(store)), name_hint_(std::move(name_hint)) {}
    HttpResponse send(const HttpRequest& request) override;

private:
    std::shared_ptr<Transport> inner_;
    std::shared_ptr<CassetteStore> store_;
    std::string name_hint_;
};

}  // namespace litpipe
