#include "litpipe/transport.hpp"

#include "litpipe/error.hpp"
#include "litpipe/text.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace litpipe {

using nlohmann::json;
namespace fs = std::filesystem;

std::optional<std::string> HttpRequest::header(std::string_view name) const {
    for (const auto& [key, value] : headers) {
        if (text::iequals(key, name)) return value;
    }
    return std::nullopt;
}

std::optional<std::string> HttpResponse::header(std::string_view name) const {
    auto it = headers.find(text::to_lower(name));
    if (it == headers.end()) return std::nullopt;
    return it->second;
}

// =============================================================================
// Live transport
// =============================================================================

HttpResponse LiveTransport::send(const HttpRequest& request) {
    httplib::Client client(request.base_url);
    client.set_url_encode(false);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Headers headers;
    for (const auto& [key, value] : request.headers) headers.emplace(key, value);

    httplib::Result result{nullptr, httplib::Error::Unknown};
    if (request.method == "GET") {
        result = client.Get(request.target, headers);
    } else if (request.method == "POST") {
        result = client.Post(request.target, headers, request.body,
                             request.content_type.empty() ? "application/json" : request.content_type);
    } else {
        fail(ErrorCode::InvalidArgument, "unsupported HTTP method " + request.method);
    }

    if (!result) {
        auto err = result.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
            fail(ErrorCode::Timeout, "request to " + request.base_url + " timed out");
        }
        Error e(ErrorCode::UpstreamError,
                "transport failure for " + request.base_url + ": " + httplib::to_string(err));
        throw e;
    }

    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    for (const auto& [key, value] : result->headers) {
        response.headers[text::to_lower(key)] = value;
    }
    return response;
}

// =============================================================================
// Retry
// =============================================================================

double BackoffSchedule::next(std::optional<double> retry_after) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double delay = policy_.base_seconds * std::pow(policy_.factor, attempt_);
    delay *= 1.0 + policy_.jitter_fraction * unit(rng_);
    if (retry_after && *retry_after > delay) delay = *retry_after;
    delay = std::max(delay, previous_);
    previous_ = delay;
    ++attempt_;
    return delay;
}

RetryingTransport::RetryingTransport(std::shared_ptr<Transport> inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](double seconds) {
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        };
    }
}

HttpResponse RetryingTransport::send(const HttpRequest& request) {
    BackoffSchedule schedule(policy_);
    HttpResponse response = inner_->send(request);
    while (RetryPolicy::retryable(response.status) && schedule.attempts() < policy_.max_retries) {
        std::optional<double> hint;
        if (auto ra = response.header("retry-after")) {
            try {
                hint = std::stod(*ra);
            } catch (const std::exception&) {
                // HTTP-date form is not interpreted
            }
        }
        double delay = schedule.next(hint);
        spdlog::warn("HTTP {} from {}; retry {} in {:.2f}s", response.status, request.base_url,
                     schedule.attempts(), delay);
        sleeper_(delay);
        response = inner_->send(request);
    }
    return response;
}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = next_slot_ && *next_slot_ > now ? *next_slot_ : now;
        next_slot_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

// =============================================================================
// Cassettes
// =============================================================================

namespace {

std::string strip_origin(std::string_view url) {
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos) return std::string(url);
    auto path = url.find('/', scheme + 3);
    if (path == std::string_view::npos) return "/";
    return std::string(url.substr(path));
}

json entry_to_json(const CassetteEntry& entry) {
    json headers = json::object();
    for (const auto& [k, v] : entry.response.headers) headers[k] = v;
    return json{
        {"request", {{"method", entry.method}, {"url", entry.url}, {"body", entry.body}}},
        {"response", {{"status", entry.response.status}, {"headers", headers}, {"body", entry.response.body}}},
    };
}

CassetteEntry entry_from_json(const json& doc) {
    CassetteEntry entry;
    const auto& req = doc.at("request");
    entry.method = req.at("method").get<std::string>();
    entry.url = req.at("url").get<std::string>();
    entry.body = req.value("body", std::string{});
    const auto& rsp = doc.at("response");
    entry.response.status = rsp.at("status").get<int>();
    entry.response.body = rsp.value("body", std::string{});
    if (rsp.contains("headers")) {
        for (const auto& [k, v] : rsp.at("headers").items()) {
            entry.response.headers[text::to_lower(k)] = v.get<std::string>();
        }
    }
    return entry;
}

}  // namespace

std::string cassette_key(std::string_view method, std::string_view url, std::string_view body) {
    std::string material;
    material.append(method).append("\n").append(strip_origin(url)).append("\n").append(body);
    return text::sha256_hex(material);
}

CassetteStore::CassetteStore(fs::path dir) : dir_(std::move(dir)) {
    reload();
}

void CassetteStore::reload() {
    std::map<std::string, CassetteEntry> loaded;
    if (fs::is_directory(dir_)) {
        std::vector<fs::path> files;
        for (const auto& item : fs::directory_iterator(dir_)) {
            if (item.is_regular_file() && item.path().extension() == ".json") files.push_back(item.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            std::ifstream in(file);
            json doc = json::parse(in, nullptr, false);
            if (doc.is_discarded() || !doc.is_object() || !doc.contains("request") || !doc.contains("response")) {
                continue;  // other documents (e.g. config.json) may share the directory
            }
            try {
                auto entry = entry_from_json(doc);
                loaded.emplace(cassette_key(entry.method, entry.url, entry.body), std::move(entry));
            } catch (const json::exception& e) {
                spdlog::warn("skipping malformed cassette {}: {}", file.string(), e.what());
            }
        }
    }
    std::unique_lock lock(mutex_);
    entries_ = std::move(loaded);
}

std::optional<CassetteEntry> CassetteStore::find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::size_t CassetteStore::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::string CassetteStore::write(const CassetteEntry& entry, const std::string& name_hint) {
    auto key = cassette_key(entry.method, entry.url, entry.body);
    std::unique_lock lock(mutex_);
    fs::create_directories(dir_);
    auto path = dir_ / (name_hint + "-" + key.substr(0, 16) + ".json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << entry_to_json(entry).dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write cassette " + path.string());
    entries_[key] = entry;
    return key;
}

HttpResponse ReplayTransport::send(const HttpRequest& request) {
    auto key = cassette_key(request.method, request.url(), request.body);
    auto entry = store_->find(key);
    if (!entry) {
        Error e(ErrorCode::CassetteMiss, "no cassette for " + request.method + " " + request.target +
                                             " (key " + key + ")");
        e.subject = key;
        throw e;
    }
    return entry->response;
}

HttpResponse RecordingTransport::send(const HttpRequest& request) {
    HttpResponse response = inner_->send(request);
    CassetteEntry entry{request.method, request.url(), request.body, {response.status, {}, response.body}};
    for (const char* kept : {"content-type", "retry-after"}) {
        if (auto value = response.header(kept)) entry.response.headers[kept] = *value;
    }
    store_->write(entry, name_hint_);
    return response;
}

}  // namespace litpipe
