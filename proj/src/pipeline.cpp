#include "litpipe/pipeline.hpp"

#include "litpipe/error.hpp"
#include "litpipe/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <random>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace litpipe {

namespace {

std::string dump(const json& j, int indent = -1) {
    return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

[[noreturn]] void bad_config(const std::string& what) {
    fail(ErrorCode::InvalidArgument, "config: " + what);
}

template <typename T>
T typed(const json& value, const std::string& key) {
    try {
        return value.get<T>();
    } catch (const json::exception&) {
        bad_config("'" + key + "' has the wrong type");
    }
}

std::size_t positive(const json& value, const std::string& key) {
    if (!value.is_number_integer() || value.get<long long>() < 1) bad_config("'" + key + "' must be a positive integer");
    return value.get<std::size_t>();
}

void apply_overrides(PipelineConfig& cfg, const json& overrides) {
    if (!overrides.is_object()) bad_config("expected a JSON object");
    for (const auto& [key, value] : overrides.items()) {
        if (key == "sources") {
            if (!value.is_array()) bad_config("'sources' must be an array");
            std::set<Source> sources;
            for (const auto& s : value) {
                if (!s.is_string()) bad_config("'sources' entries must be strings");
                sources.insert(source_from_string(s.get<std::string>()));
            }
            cfg.sources = std::move(sources);
        } else if (key == "per_source_limit") {
            cfg.per_source_limit = positive(value, key);
        } else if (key == "top_k") {
            cfg.top_k = positive(value, key);
        } else if (key == "max_rerank") {
            cfg.max_rerank = positive(value, key);
        } else if (key == "rerank_method") {
            cfg.rerank_method = rank_method_from_string(typed<std::string>(value, key));
        } else if (key == "sort_key") {
            cfg.sort_key = sort_key_from_string(typed<std::string>(value, key));
        } else if (key == "abstract_char_cap") {
            cfg.abstract_char_cap = positive(value, key);
        } else if (key == "max_query_words") {
            cfg.max_query_words = positive(value, key);
        } else if (key == "strict_plan_mode") {
            cfg.strict_plan_mode = typed<bool>(value, key);
        } else if (key == "debate_concurrency") {
            cfg.debate_concurrency = positive(value, key);
        } else if (key == "reprompt_on_unparseable") {
            cfg.reprompt_on_unparseable = typed<bool>(value, key);
        } else if (key == "zero_shot_uses_ranked") {
            cfg.zero_shot_uses_ranked = typed<bool>(value, key);
        } else if (key == "models") {
            if (!value.is_object()) bad_config("'models' must be an object");
            for (const auto& [stage, model] : value.items()) {
                auto name = typed<std::string>(model, "models." + stage);
                if (stage == "query") cfg.models.query = name;
                else if (stage == "rerank") cfg.models.rerank = name;
                else if (stage == "generation") cfg.models.generation = name;
                else bad_config("unknown stage 'models." + stage + "'");
            }
        } else if (key == "temperatures") {
            if (!value.is_object()) bad_config("'temperatures' must be an object");
            for (const auto& [stage, temp] : value.items()) {
                if (!temp.is_number()) bad_config("'temperatures." + stage + "' must be a number");
                double t = temp.get<double>();
                if (stage == "query") cfg.temperatures.query = t;
                else if (stage == "rerank") cfg.temperatures.rerank = t;
                else if (stage == "generation") cfg.temperatures.generation = t;
                else bad_config("unknown stage 'temperatures." + stage + "'");
            }
        } else {
            bad_config("unknown key '" + key + "'");
        }
    }
}

}  // namespace

// =============================================================================
// Configuration
// =============================================================================

void PipelineConfig::validate() const {
    if (sources.empty()) bad_config("at least one source is required");
    if (per_source_limit < 1 || per_source_limit > 100) bad_config("per_source_limit must be in 1..100");
    if (top_k < 1) bad_config("top_k must be positive");
    if (top_k > per_source_limit * sources.size()) {
        bad_config("top_k " + std::to_string(top_k) + " exceeds per_source_limit x sources (" +
                   std::to_string(per_source_limit * sources.size()) + ")");
    }
    if (max_rerank < 1) bad_config("max_rerank must be positive");
    if (top_k > max_rerank) bad_config("top_k exceeds max_rerank");
    if (abstract_char_cap < 1 || max_query_words < 1 || debate_concurrency < 1) bad_config("caps must be positive");
    for (double t : {temperatures.query, temperatures.rerank, temperatures.generation}) {
        if (!(t >= 0.0 && t <= 2.0)) bad_config("temperatures must be in [0, 2]");
    }
    for (const auto* m : {&models.query, &models.rerank, &models.generation}) {
        if (text::trim(*m).empty()) bad_config("model names must be non-empty");
    }
}

void to_json(json& j, const PipelineConfig& v) {
    j = json{{"sources", v.sources},
             {"per_source_limit", v.per_source_limit},
             {"top_k", v.top_k},
             {"max_rerank", v.max_rerank},
             {"rerank_method", v.rerank_method},
             {"sort_key", v.sort_key},
             {"abstract_char_cap", v.abstract_char_cap},
             {"max_query_words", v.max_query_words},
             {"strict_plan_mode", v.strict_plan_mode},
             {"models", {{"query", v.models.query}, {"rerank", v.models.rerank}, {"generation", v.models.generation}}},
             {"temperatures",
              {{"query", v.temperatures.query},
               {"rerank", v.temperatures.rerank},
               {"generation", v.temperatures.generation}}},
             {"debate_concurrency", v.debate_concurrency},
             {"reprompt_on_unparseable", v.reprompt_on_unparseable},
             {"zero_shot_uses_ranked", v.zero_shot_uses_ranked}};
}

void from_json(const json& j, PipelineConfig& v) {
    v = PipelineConfig{};
    apply_overrides(v, j);
}

PipelineConfig merge_config(PipelineConfig base, const json& overrides) {
    if (!overrides.is_null()) apply_overrides(base, overrides);
    base.validate();
    return base;
}

// =============================================================================
// Sessions
// =============================================================================

void to_json(json& j, const StageError& v) {
    j = json{{"stage", v.stage}, {"code", v.code}, {"message", v.message}};
    j["retry_after"] = v.retry_after ? json(*v.retry_after) : json(nullptr);
}

void from_json(const json& j, StageError& v) {
    v.stage = j.at("stage").get<std::string>();
    v.code = j.at("code").get<std::string>();
    v.message = j.at("message").get<std::string>();
    if (auto it = j.find("retry_after"); it != j.end() && !it->is_null()) v.retry_after = it->get<double>();
}

namespace {

const std::set<std::string>& session_keys() {
    static const std::set<std::string> keys{
        "session_id", "created_at", "query_spec", "config", "retrieved_count", "candidates", "ranked",
        "debate_verdicts", "drafts", "audit", "errors", "view_sort", "pinned_order", "log"};
    return keys;
}

}  // namespace

void to_json(json& j, const PipelineSession& v) {
    j = json::object();
    if (v.extra.is_object()) {
        for (const auto& [key, value] : v.extra.items()) {
            if (!session_keys().contains(key)) j[key] = value;
        }
    }
    j["session_id"] = v.session_id;
    j["created_at"] = v.created_at;
    j["query_spec"] = v.query_spec;
    j["config"] = v.config;
    j["retrieved_count"] = v.retrieved_count;
    j["candidates"] = v.candidates;
    j["ranked"] = v.ranked;
    j["debate_verdicts"] = v.debate_verdicts;
    j["drafts"] = v.drafts;
    j["audit"] = v.audit;
    j["errors"] = v.errors;
    j["view_sort"] = v.view_sort;
    j["pinned_order"] = v.pinned_order ? json(*v.pinned_order) : json(nullptr);
    j["log"] = v.log;
}

void from_json(const json& j, PipelineSession& v) {
    v = PipelineSession{};
    v.session_id = j.at("session_id").get<std::string>();
    v.created_at = j.at("created_at").get<std::string>();
    v.query_spec = j.at("query_spec").get<QuerySpec>();
    v.config = j.at("config").get<PipelineConfig>();
    v.retrieved_count = j.at("retrieved_count").get<std::size_t>();
    v.candidates = j.at("candidates").get<std::vector<PaperRecord>>();
    v.ranked = j.at("ranked").get<RankedList>();
    v.debate_verdicts = j.at("debate_verdicts").get<std::vector<DebateVerdict>>();
    v.drafts = j.at("drafts").get<std::vector<ReviewDraft>>();
    v.audit = j.at("audit").get<std::vector<LlmExchange>>();
    v.errors = j.at("errors").get<std::vector<StageError>>();
    v.view_sort = j.at("view_sort").get<SortKey>();
    if (const auto& p = j.at("pinned_order"); !p.is_null()) v.pinned_order = p.get<std::vector<std::size_t>>();
    v.log = j.at("log").get<std::vector<std::string>>();
    for (const auto& [key, value] : j.items()) {
        if (!session_keys().contains(key)) v.extra[key] = value;
    }
}

std::vector<PaperRecord> context_order(const PipelineSession& session) {
    if (session.pinned_order) {
        std::vector<PaperRecord> out;
        for (auto i : *session.pinned_order) out.push_back(session.candidates.at(i - 1));
        return out;
    }
    if (session.ranked.n != session.candidates.size() || session.candidates.empty()) return session.candidates;
    return apply_ranking(session.candidates, session.ranked);
}

void to_json(json& j, const CandidateView& v) {
    j = json{{"marker", v.marker}, {"paper", v.paper}};
}

std::vector<CandidateView> candidate_view(const PipelineSession& session, std::optional<SortKey> sort) {
    auto context = context_order(session);
    std::map<std::string, std::size_t> marker;
    for (std::size_t i = 0; i < context.size(); ++i) marker.emplace(context[i].canonical_id, i + 1);
    std::vector<CandidateView> view;
    for (auto& paper : sort_papers(context, sort.value_or(session.view_sort))) {
        view.push_back({marker.at(paper.canonical_id), std::move(paper)});
    }
    return view;
}

namespace {

[[noreturn]] void corrupt(const std::string& what) {
    fail(ErrorCode::CorruptSession, "corrupt session document: " + what);
}

}  // namespace

std::string serialize_session(const PipelineSession& session) {
    json body = session;
    json doc = json::object();
    doc["schema_version"] = kSessionSchemaVersion;
    doc["checksum"] = text::sha256_hex(dump(body));
    doc["session"] = std::move(body);
    return dump(doc, 2) + "\n";
}

PipelineSession parse_session(std::string_view document) {
    json doc = json::parse(document.begin(), document.end(), nullptr, false);
    if (doc.is_discarded()) corrupt("not valid JSON (truncated?)");
    if (!doc.is_object()) corrupt("expected an object");
    auto version = doc.find("schema_version");
    if (version == doc.end() || !version->is_number_integer()) corrupt("missing schema_version");
    auto checksum = doc.find("checksum");
    auto body = doc.find("session");
    if (checksum == doc.end() || !checksum->is_string() || body == doc.end() || !body->is_object()) {
        corrupt("missing checksum or session");
    }
    if (text::sha256_hex(dump(*body)) != checksum->get<std::string>()) corrupt("checksum mismatch");
    try {
        return body->get<PipelineSession>();
    } catch (const json::exception& e) {
        corrupt(e.what());
    } catch (const Error& e) {
        corrupt(e.what());
    }
}

void write_session_file(const fs::path& path, const PipelineSession& session) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
        out << serialize_session(session);
        if (!out.flush()) fail(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

PipelineSession read_session_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        Error e(ErrorCode::NotFound, "no session at " + path.string());
        e.subject = path.string();
        throw e;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_session(buffer.str());
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

fs::path SessionStore::path_for(const std::string& session_id) const {
    static const std::regex valid("[A-Za-z0-9_-]{1,128}");
    if (!std::regex_match(session_id, valid)) {
        Error e(ErrorCode::NotFound, "no session '" + session_id + "'");
        e.subject = session_id;
        throw e;
    }
    return dir_ / (session_id + ".json");
}

void SessionStore::save(const PipelineSession& session) const {
    write_session_file(path_for(session.session_id), session);
}

PipelineSession SessionStore::load(const std::string& session_id) const {
    auto path = path_for(session_id);
    if (!fs::exists(path)) {
        Error e(ErrorCode::NotFound, "no session '" + session_id + "'");
        e.subject = session_id;
        throw e;
    }
    return read_session_file(path);
}

bool SessionStore::exists(const std::string& session_id) const {
    try {
        return fs::exists(path_for(session_id));
    } catch (const Error&) {
        return false;
    }
}

std::vector<std::string> SessionStore::list() const {
    std::vector<std::string> ids;
    for (const auto& item : fs::directory_iterator(dir_)) {
        if (item.is_regular_file() && item.path().extension() == ".json") ids.push_back(item.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

// =============================================================================
// Search cache
// =============================================================================

SearchCache::SearchCache(std::chrono::seconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
}

std::string SearchCache::key(Source source, std::string_view kind, std::string_view query, std::size_t limit) {
    std::string k(to_string(source));
    k += '\x1f';
    k += kind;
    k += '\x1f';
    k += query;
    k += '\x1f';
    k += std::to_string(limit);
    return k;
}

std::optional<SearchBatch> SearchCache::get(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end() || clock_() - it->second.stored >= ttl_) return std::nullopt;
    return it->second.batch;
}

void SearchCache::put(const std::string& key, SearchBatch batch) {
    std::lock_guard lock(mutex_);
    entries_[key] = {clock_(), std::move(batch)};
}

std::size_t SearchCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

// =============================================================================
// Runtime wiring
// =============================================================================

ApiCredentials credentials_from_env() {
    ApiCredentials creds;
    if (const char* key = std::getenv("LITPIPE_S2_API_KEY"); key && *key) creds.s2_api_key = key;
    if (const char* mail = std::getenv("LITPIPE_CONTACT_EMAIL"); mail && *mail) creds.contact_email = mail;
    return creds;
}

std::string random_session_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

PipelineServices make_services(const RuntimeOptions& options) {
    PipelineServices services;
    services.credentials = options.credentials;
    services.endpoints = options.endpoints;
    services.gateway = options.gateway;
    services.cache = std::make_shared<SearchCache>();
    services.new_session_id = random_session_id;
    services.now = utc_timestamp_now;

    if (options.mode == BackendMode::Replay) {
        if (!fs::is_directory(options.cassette_dir)) {
            fail(ErrorCode::InvalidArgument, "replay directory '" + options.cassette_dir.string() + "' does not exist");
        }
        auto store = std::make_shared<CassetteStore>(options.cassette_dir);
        services.s2_transport = std::make_shared<ReplayTransport>(store);
        services.openalex_transport = services.s2_transport;
        services.llm = std::make_shared<ReplayLlmBackend>(store);
        return services;
    }

    auto live = std::make_shared<LiveTransport>();
    auto s2_limiter = std::make_shared<RateLimiter>(options.s2_interval);
    auto openalex_limiter = std::make_shared<RateLimiter>(options.openalex_interval);
    std::shared_ptr<Transport> s2 =
        std::make_shared<RetryingTransport>(std::make_shared<RateLimitedTransport>(live, s2_limiter), options.retry);
    std::shared_ptr<Transport> openalex = std::make_shared<RetryingTransport>(
        std::make_shared<RateLimitedTransport>(live, openalex_limiter), options.retry);
    std::shared_ptr<LlmBackend> llm =
        std::make_shared<LiveLlmBackend>(options.llm, std::make_shared<RetryingTransport>(live, options.retry));

    if (options.mode == BackendMode::Record) {
        fs::create_directories(options.cassette_dir);
        auto store = std::make_shared<CassetteStore>(options.cassette_dir);
        s2 = std::make_shared<RecordingTransport>(s2, store, "s2");
        openalex = std::make_shared<RecordingTransport>(openalex, store, "openalex");
        llm = std::make_shared<RecordingLlmBackend>(llm, store);
    }
    services.s2_transport = std::move(s2);
    services.openalex_transport = std::move(openalex);
    services.llm = std::move(llm);
    return services;
}

// =============================================================================
// Orchestration
// =============================================================================

namespace {

/// Text standing in for the research abstract in rerank and generation
/// prompts when the user supplied none.
std::string topic_text(const QuerySpec& spec) {
    if (spec.has_abstract()) return std::string(text::trim(spec.abstract_text));
    if (spec.synthesized_query && !text::trim(*spec.synthesized_query).empty()) return *spec.synthesized_query;
    return {};
}

GenerationOptions generation_options(const PipelineConfig& config) {
    GenerationOptions options;
    options.model = config.models.generation;
    options.temperature = config.temperatures.generation;
    options.abstract_char_cap = config.abstract_char_cap;
    options.strict_plan_mode = config.strict_plan_mode;
    return options;
}

std::string generation_topic(const QuerySpec& spec) {
    auto topic = topic_text(spec);
    if (!topic.empty()) return topic;
    return "Work related to the seed paper(s) " + text::join(spec.seed_ids, ", ");
}

void note_draft(PipelineSession& session, const ReviewDraft& draft) {
    for (const auto& w : draft.warnings) session.log.push_back(std::string(to_string(draft.mode)) + " draft: " + w);
}

StageError stage_error(const std::string& stage, const Error& e) {
    return {stage, std::string(to_string(e.code())), e.what(), e.retry_after};
}

}  // namespace

Pipeline::Pipeline(PipelineServices services, std::shared_ptr<SessionStore> store)
    : services_(std::move(services)), store_(std::move(store)) {
    if (!services_.new_session_id) services_.new_session_id = random_session_id;
    if (!services_.now) services_.now = utc_timestamp_now;
}

std::shared_ptr<std::mutex> Pipeline::session_lock(const std::string& session_id) {
    std::lock_guard lock(locks_mutex_);
    auto& slot = locks_[session_id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

SearchBatch Pipeline::cached_search(Source source, std::string_view kind, const std::string& query, std::size_t limit,
                                    const std::function<SearchBatch()>& fetch) const {
    if (!services_.cache) return fetch();
    auto key = SearchCache::key(source, kind, query, limit);
    if (auto hit = services_.cache->get(key)) {
        spdlog::debug("cache hit: {} {} '{}'", to_string(source), kind, query);
        return *hit;
    }
    auto batch = fetch();
    services_.cache->put(key, batch);
    return batch;
}

PipelineSession Pipeline::run_pipeline(const QuerySpec& input, const PipelineConfig& config,
                                       const std::optional<SentencePlan>& plan) {
    input.validate();
    config.validate();
    if (plan) plan->validate();

    PipelineSession session;
    session.session_id = services_.new_session_id();
    session.created_at = services_.now();
    session.query_spec = input;
    session.config = config;
    session.view_sort = config.sort_key;

    auto audit = std::make_shared<AuditLog>();
    LlmGateway gateway(services_.llm, services_.gateway, audit);
    std::string stage = "query_synthesis";

    try {
        // Query synthesis. Seed-only input has no query at all.
        std::optional<std::string> query;
        if (input.has_abstract()) {
            QuerySynthesisOptions qo;
            qo.model = config.models.query;
            qo.temperature = config.temperatures.query;
            qo.max_query_words = config.max_query_words;
            query = merge_user_keywords(summarize_abstract_to_query(gateway, input.abstract_text, qo),
                                        input.user_keywords);
        } else if (!input.user_keywords.empty()) {
            query = merge_user_keywords("", input.user_keywords);
        }
        if (query && text::trim(*query).empty()) query.reset();
        session.query_spec.synthesized_query = query;
        if (query) session.log.push_back("query: " + *query);

        // Retrieval. Batch order fixes merge tie-breaking: S2 search, seed
        // recommendations, OpenAlex search.
        stage = "retrieval";
        SemanticScholarClient s2(services_.s2_transport, services_.credentials, services_.endpoints.s2_base);
        OpenAlexClient openalex(services_.openalex_transport, services_.credentials, services_.endpoints.openalex_base);
        const int limit = static_cast<int>(config.per_source_limit);

        struct Task {
            Source source;
            std::string kind;
            std::string query;
            std::function<SearchBatch()> fetch;
        };
        std::vector<Task> tasks;
        if (query && config.sources.contains(Source::S2)) {
            tasks.push_back({Source::S2, "search", *query, [&, q = *query] { return s2.search(q, limit); }});
        }
        for (const auto& seed : input.seed_ids) {
            tasks.push_back({Source::S2, "recommend", seed, [&, seed] { return s2.recommend(seed, limit); }});
        }
        if (query && config.sources.contains(Source::OpenAlex)) {
            tasks.push_back(
                {Source::OpenAlex, "search", *query, [&, q = *query] { return openalex.search(q, limit); }});
        }

        std::vector<std::future<SearchBatch>> pending;
        for (const auto& task : tasks) {
            pending.push_back(std::async(std::launch::async, [this, &task, &config] {
                return cached_search(task.source, task.kind, task.query, config.per_source_limit, task.fetch);
            }));
        }
        std::vector<SearchBatch> results;
        std::exception_ptr first_error;
        for (auto& f : pending) {
            try {
                results.push_back(f.get());
            } catch (...) {
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);

        std::vector<std::vector<SourceRecord>> batches;
        for (std::size_t i = 0; i < results.size(); ++i) {
            session.log.push_back(std::string(to_string(tasks[i].source)) + " " + tasks[i].kind + ": " +
                                  std::to_string(results[i].records.size()) + " records, " +
                                  std::to_string(results[i].dropped) + " dropped");
            batches.push_back(std::move(results[i].records));
        }
        auto merged = merge_and_dedup(batches);
        session.retrieved_count = merged.size();
        if (merged.empty()) fail(ErrorCode::NoCandidatesFound, "no source returned any candidate");
        session.candidates = truncate_candidates(sort_papers(merged, SortKey::Relevance), config.top_k);

        // Reranking.
        stage = "rerank";
        const std::size_t n = session.candidates.size();
        const std::string topic = topic_text(session.query_spec);
        RerankOptions ro;
        ro.model = config.models.rerank;
        ro.temperature = config.temperatures.rerank;
        ro.max_rerank = config.max_rerank;
        ro.abstract_char_cap = config.abstract_char_cap;
        ro.reprompt_on_unparseable = config.reprompt_on_unparseable;
        ro.debate_concurrency = config.debate_concurrency;

        auto fallback = [&](const std::string& why) {
            session.ranked = source_order(n);
            session.ranked.fallback = true;
            session.ranked.repairs_applied.emplace_back(kRepairFallback);
            session.log.push_back("rerank: " + why + "; kept source order");
        };
        if (n == 1 || config.rerank_method == RankMethod::SourceOrder) {
            session.ranked = source_order(n);
        } else if (topic.empty()) {
            fallback("no abstract or query to rank against");
        } else if (config.rerank_method == RankMethod::Permutation) {
            session.ranked = rerank_by_permutation(gateway, topic, session.candidates, ro);
        } else {
            try {
                session.ranked = rerank_by_debate(gateway, topic, session.candidates, ro, &session.debate_verdicts);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::Unparseable) throw;
                fallback(std::string("debate reply unparseable (") + e.what() + ")");
            }
        }
        if (!session.ranked.repairs_applied.empty()) {
            session.log.push_back("rerank repairs: " + text::join(session.ranked.repairs_applied, ", "));
        }

        // Generation.
        stage = "generation";
        auto go = generation_options(config);
        auto ranked_context = context_order(session);
        GenerationContext zero_ctx{generation_topic(session.query_spec),
                                   config.zero_shot_uses_ranked ? ranked_context : session.candidates};
        session.drafts.push_back(generate_zero_shot(gateway, zero_ctx, go));
        note_draft(session, session.drafts.back());
        if (plan) {
            GenerationContext plan_ctx{zero_ctx.abstract_text, ranked_context};
            session.drafts.push_back(generate_with_plan(gateway, plan_ctx, *plan, go));
            note_draft(session, session.drafts.back());
        }
    } catch (Error& e) {
        session.audit = audit->snapshot();
        session.errors.push_back(stage_error(stage, e));
        try {
            save_session(session);
        } catch (const std::exception& save_error) {
            spdlog::error("could not persist failed session {}: {}", session.session_id, save_error.what());
        }
        if (!e.stage()) e.with_stage(stage);
        throw;
    }

    session.audit = audit->snapshot();
    save_session(session);
    return session;
}

namespace {

void regenerate_into(PipelineSession& session, const PipelineServices& services,
                     const std::optional<SentencePlan>& plan, std::optional<SortKey> sort, bool pin) {
    if (session.candidates.empty()) fail(ErrorCode::NoCandidatesFound, "session has no candidates to cite");
    if (plan) {
        plan->validate();
        plan->check_context(session.candidates.size());
    }

    if (sort) session.view_sort = *sort;
    if (pin) {
        PipelineSession unpinned = session;
        unpinned.pinned_order.reset();
        std::vector<std::size_t> order;
        for (const auto& view : candidate_view(unpinned, session.view_sort)) {
            auto it = std::find_if(session.candidates.begin(), session.candidates.end(),
                                   [&](const PaperRecord& p) { return p.canonical_id == view.paper.canonical_id; });
            order.push_back(static_cast<std::size_t>(it - session.candidates.begin()) + 1);
        }
        session.pinned_order = std::move(order);
        session.log.push_back("generation order pinned to sort '" + std::string(to_string(session.view_sort)) + "'");
    }

    auto audit = std::make_shared<AuditLog>(session.audit);
    LlmGateway gateway(services.llm, services.gateway, audit);
    GenerationContext ctx{generation_topic(session.query_spec), context_order(session)};
    try {
        auto go = generation_options(session.config);
        session.drafts.push_back(plan ? generate_with_plan(gateway, ctx, *plan, go)
                                      : generate_zero_shot(gateway, ctx, go));
        note_draft(session, session.drafts.back());
    } catch (Error& e) {
        session.audit = audit->snapshot();
        session.errors.push_back(stage_error("generation", e));
        if (!e.stage()) e.with_stage("generation");
        throw;
    }
    session.audit = audit->snapshot();
}

}  // namespace

PipelineSession Pipeline::regenerate(const std::string& session_id, const std::optional<SentencePlan>& plan,
                                     std::optional<SortKey> sort, bool pin) {
    auto lock_ptr = session_lock(session_id);
    std::lock_guard lock(*lock_ptr);
    auto session = load_session(session_id);
    auto before = session.errors.size();
    try {
        regenerate_into(session, services_, plan, sort, pin);
    } catch (const Error&) {
        // Only failures that reached the model are worth keeping.
        if (session.errors.size() > before) save_session(session);
        throw;
    }
    save_session(session);
    return session;
}

PipelineSession Pipeline::regenerate_session(PipelineSession session, const std::optional<SentencePlan>& plan,
                                             std::optional<SortKey> sort, bool pin) {
    regenerate_into(session, services_, plan, sort, pin);
    return session;
}

void Pipeline::save_session(const PipelineSession& session) const {
    if (store_) store_->save(session);
}

PipelineSession Pipeline::load_session(const std::string& session_id) const {
    if (!store_) {
        Error e(ErrorCode::NotFound, "no session store configured");
        e.subject = session_id;
        throw e;
    }
    return store_->load(session_id);
}

}  // namespace litpipe
