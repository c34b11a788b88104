#include "litpipe/service_api.hpp"

#include "litpipe/text.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

namespace litpipe {

void to_json(json& j, const ApiError& v) {
    j = json{{"code", v.code}, {"message", v.message}};
    j["stage"] = v.stage ? json(*v.stage) : json(nullptr);
    if (v.position) j["position"] = *v.position;
    if (v.retry_after) j["retry_after"] = *v.retry_after;
}

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::EmptyQuery:
        case ErrorCode::EmptyAbstract:
        case ErrorCode::InvalidSeed:
        case ErrorCode::PlanLineOutOfRange:
        case ErrorCode::DuplicateDirective:
        case ErrorCode::TooManyCandidates:
            return 400;
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::PlanContextMismatch:
            return 409;
        case ErrorCode::SyntaxError:
        case ErrorCode::NoCandidatesFound:
        case ErrorCode::BudgetExceeded:
            return 422;
        case ErrorCode::RateLimited:
            return 429;
        case ErrorCode::UpstreamError:
        case ErrorCode::DecodeError:
        case ErrorCode::ProviderError:
        case ErrorCode::Timeout:
        case ErrorCode::CassetteMiss:
        case ErrorCode::LlmFailure:
            return 502;
        case ErrorCode::MissingVariable:
        case ErrorCode::UnknownPlaceholder:
        case ErrorCode::Unparseable:
        case ErrorCode::IncompleteVerdictSet:
        case ErrorCode::CorruptSession:
            return 500;
    }
    return 500;
}

ApiError api_error_from(const Error& error) {
    ApiError api;
    api.code = std::string(to_string(error.code()));
    api.status = http_status_for(error.code());
    api.message = error.what();
    api.stage = error.stage();
    api.position = error.position;
    api.retry_after = error.retry_after;
    // A rate limit hit by the model provider arrives wrapped.
    if (error.code() == ErrorCode::LlmFailure && error.subject == to_string(ErrorCode::RateLimited)) {
        api.status = 429;
    }
    return api;
}

namespace {

const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2, ' ', false, json::error_handler_t::replace), kJson);
}

void send_error(httplib::Response& res, const ApiError& error) {
    if (error.retry_after) {
        res.set_header("Retry-After", std::to_string(static_cast<long long>(std::ceil(*error.retry_after))));
    }
    send_json(res, error.status, error);
}

ApiError bad_request(const std::string& message) {
    return {400, std::string(to_string(ErrorCode::InvalidArgument)), message, std::nullopt, std::nullopt,
            std::nullopt};
}

json parse_body(const httplib::Request& req, bool allow_empty) {
    if (text::trim(req.body).empty()) {
        if (allow_empty) return json::object();
        fail(ErrorCode::InvalidArgument, "request body is empty");
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return body;
}

std::vector<std::string> string_list(const json& value, const std::string& key) {
    if (value.is_string()) {
        std::vector<std::string> out;
        std::string item;
        std::stringstream in(value.get<std::string>());
        while (std::getline(in, item, ',')) {
            auto trimmed = text::trim(item);
            if (!trimmed.empty()) out.emplace_back(trimmed);
        }
        return out;
    }
    if (!value.is_array()) fail(ErrorCode::InvalidArgument, "'" + key + "' must be a string or an array of strings");
    std::vector<std::string> out;
    for (const auto& item : value) {
        if (!item.is_string()) fail(ErrorCode::InvalidArgument, "'" + key + "' entries must be strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

json session_summary(const PipelineSession& session) {
    json view = candidate_view(session);
    return json{{"session_id", session.session_id},
                {"created_at", session.created_at},
                {"query", session.query_spec.synthesized_query ? json(*session.query_spec.synthesized_query)
                                                               : json(nullptr)},
                {"retrieved_count", session.retrieved_count},
                {"candidates", view},
                {"ranked", session.ranked},
                {"drafts", session.drafts},
                {"errors", session.errors},
                {"links",
                 {{"self", "/v1/sessions/" + session.session_id},
                  {"papers", "/v1/sessions/" + session.session_id + "/papers"},
                  {"drafts", "/v1/sessions/" + session.session_id + "/drafts"}}}};
}

}  // namespace

struct ApiServer::Impl {
    std::shared_ptr<Pipeline> pipeline;
    PipelineConfig defaults;
    ServiceOptions options;
    httplib::Server server;
    std::thread thread;

    template <typename Handler>
    void guarded(httplib::Response& res, Handler&& handler) {
        try {
            handler();
        } catch (const Error& e) {
            auto api = api_error_from(e);
            if (api.status >= 500) spdlog::error("{}: {}", api.code, api.message);
            send_error(res, api);
        } catch (const std::exception& e) {
            spdlog::error("internal error: {}", e.what());
            send_error(res, {500, "Internal", "internal server error", std::nullopt, std::nullopt, std::nullopt});
        }
    }

    void create_session(const httplib::Request& req, httplib::Response& res) {
        json body = parse_body(req, false);
        QuerySpec spec;
        std::optional<SentencePlan> plan;
        PipelineConfig config = defaults;
        for (const auto& [key, value] : body.items()) {
            if (key == "abstract") {
                if (!value.is_string()) fail(ErrorCode::InvalidArgument, "'abstract' must be a string");
                spec.abstract_text = value.get<std::string>();
            } else if (key == "keywords") {
                spec.user_keywords = string_list(value, key);
            } else if (key == "seeds") {
                spec.seed_ids = string_list(value, key);
            } else if (key == "plan") {
                if (!value.is_null()) {
                    if (!value.is_string()) fail(ErrorCode::InvalidArgument, "'plan' must be a string");
                    plan = parse_plan(value.get<std::string>());
                }
            } else if (key == "config") {
                config = merge_config(config, value);
            } else {
                fail(ErrorCode::InvalidArgument, "unknown field '" + key + "'");
            }
        }
        auto session = pipeline->run_pipeline(spec, config, plan);
        res.set_header("Location", "/v1/sessions/" + session.session_id);
        send_json(res, 201, session_summary(session));
    }

    void get_session(const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, json(pipeline->load_session(req.matches[1])));
    }

    void get_papers(const httplib::Request& req, httplib::Response& res) {
        auto session = pipeline->load_session(req.matches[1]);
        std::optional<SortKey> sort;
        if (req.has_param("sort")) sort = sort_key_from_string(req.get_param_value("sort"));
        SortKey applied = sort.value_or(session.view_sort);
        send_json(res, 200,
                  json{{"session_id", session.session_id},
                       {"sort", applied},
                       {"papers", candidate_view(session, applied)}});
    }

    void create_draft(const httplib::Request& req, httplib::Response& res) {
        std::string id = req.matches[1];
        json body = parse_body(req, true);
        std::optional<SentencePlan> plan;
        std::optional<SortKey> sort;
        bool pin = false;
        for (const auto& [key, value] : body.items()) {
            if (key == "plan") {
                if (value.is_null()) continue;
                if (!value.is_string()) fail(ErrorCode::InvalidArgument, "'plan' must be a string");
                plan = parse_plan(value.get<std::string>());
            } else if (key == "sort") {
                if (!value.is_string()) fail(ErrorCode::InvalidArgument, "'sort' must be a string");
                sort = sort_key_from_string(value.get<std::string>());
            } else if (key == "pin") {
                if (!value.is_boolean()) fail(ErrorCode::InvalidArgument, "'pin' must be a boolean");
                pin = value.get<bool>();
            } else {
                fail(ErrorCode::InvalidArgument, "unknown field '" + key + "'");
            }
        }
        auto session = pipeline->regenerate(id, plan, sort, pin);
        json draft = session.drafts.back();
        draft["draft_index"] = session.drafts.size() - 1;
        draft["session_id"] = session.session_id;
        send_json(res, 200, draft);
    }

    void install() {
        server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"},
                                    {"Access-Control-Expose-Headers", "Location, Retry-After"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, json{{"status", "ok"}});
        });
        server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { create_session(req, res); });
        });
        server.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { get_session(req, res); });
        });
        server.Get(R"(/v1/sessions/([^/]+)/papers)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { get_papers(req, res); });
        });
        server.Post(R"(/v1/sessions/([^/]+)/drafts)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { create_draft(req, res); });
        });

        // Unmatched routes and anything else that left the body empty.
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            ApiError api;
            api.status = res.status;
            api.code = res.status == 404 ? std::string(to_string(ErrorCode::NotFound)) : "Internal";
            api.message = res.status == 404 ? "no route for " + req.method + " " + req.path
                                            : "request failed with status " + std::to_string(res.status);
            if (res.status == 400) {
                api = bad_request("malformed request");
            }
            send_json(res, api.status, api);
            return httplib::Server::HandlerResponse::Handled;
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
            send_error(res, {500, "Internal", "internal server error", std::nullopt, std::nullopt, std::nullopt});
        });
    }
};

ApiServer::ApiServer(std::shared_ptr<Pipeline> pipeline, PipelineConfig defaults, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
    defaults.validate();
    impl_->pipeline = std::move(pipeline);
    impl_->defaults = std::move(defaults);
    impl_->options = std::move(options);
    impl_->install();
}

ApiServer::~ApiServer() {
    stop();
}

bool ApiServer::listen() {
    spdlog::info("listening on http://{}:{}", impl_->options.host, impl_->options.port);
    return impl_->server.listen(impl_->options.host, impl_->options.port);
}

int ApiServer::start() {
    int port = impl_->options.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->options.host);
    } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
        port = -1;
    }
    if (port < 0) fail(ErrorCode::InvalidArgument, "cannot bind " + impl_->options.host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void ApiServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace litpipe
