#pragma once

#include "litpipe/corpus.hpp"
#include "litpipe/generation.hpp"
#include "litpipe/llm_gateway.hpp"
#include "litpipe/plan_language.hpp"
#include "litpipe/query_synthesis.hpp"
#include "litpipe/reranking.hpp"
#include "litpipe/scholarly_search.hpp"
#include "litpipe/serialization.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace litpipe {

// =============================================================================
// Configuration
// =============================================================================

struct StageSettings {
    std::string query = "gpt-3.5-turbo";
    std::string rerank = "gpt-4";
    std::string generation = "gpt-4";

    bool operator==(const StageSettings&) const = default;
};

struct StageTemperatures {
    double query = 0.0;
    double rerank = 0.0;
    double generation = 0.7;

    bool operator==(const StageTemperatures&) const = default;
};

struct PipelineConfig {
    std::set<Source> sources{Source::S2, Source::OpenAlex};
    std::size_t per_source_limit = 20;
    std::size_t top_k = 10;
    std::size_t max_rerank = 10;
    RankMethod rerank_method = RankMethod::Permutation;
    SortKey sort_key = SortKey::Relevance;
    std::size_t abstract_char_cap = 1200;
    std::size_t max_query_words = 12;
    bool strict_plan_mode = false;
    StageSettings models;
    StageTemperatures temperatures;
    std::size_t debate_concurrency = 4;
    bool reprompt_on_unparseable = false;
    // Zero-shot drafts see the reranked list; false hands them source order.
    bool zero_shot_uses_ranked = true;

    bool operator==(const PipelineConfig&) const = default;

    /// Throws InvalidArgument.
    void validate() const;
};

void to_json(json& j, const PipelineConfig& v);
void from_json(const json& j, PipelineConfig& v);

/// Applies a (possibly partial) JSON override document. Unknown keys and
/// ill-typed values are InvalidArgument. The result is validated.
PipelineConfig merge_config(PipelineConfig base, const json& overrides);

// =============================================================================
// Sessions
// =============================================================================

struct StageError {
    std::string stage;
    std::string code;
    std::string message;
    std::optional<double> retry_after;

    bool operator==(const StageError&) const = default;
};

struct PipelineSession {
    std::string session_id;
    std::string created_at;
    QuerySpec query_spec;
    PipelineConfig config;
    std::size_t retrieved_count = 0;        // after dedup, before top-k
    std::vector<PaperRecord> candidates;    // top-k in retrieval order
    RankedList ranked;                      // over candidates
    std::vector<DebateVerdict> debate_verdicts;
    std::vector<ReviewDraft> drafts;
    std::vector<LlmExchange> audit;
    std::vector<StageError> errors;
    SortKey view_sort = SortKey::Relevance;
    // 1-based candidate indices; when set, generation uses this order
    // instead of the LLM ranking.
    std::optional<std::vector<std::size_t>> pinned_order;
    std::vector<std::string> log;
    json extra = json::object();  // fields written by newer versions

    bool operator==(const PipelineSession&) const = default;
};

void to_json(json& j, const StageError& v);
void from_json(const json& j, StageError& v);
void to_json(json& j, const PipelineSession& v);
void from_json(const json& j, PipelineSession& v);

/// Papers in the order generation cites them: [i] is element i-1.
std::vector<PaperRecord> context_order(const PipelineSession& session);

struct CandidateView {
    std::size_t marker = 0;  // the [i] this paper carries in drafts
    PaperRecord paper;
};

void to_json(json& j, const CandidateView& v);

/// The context order re-sorted by `sort` (default: the session's view sort).
std::vector<CandidateView> candidate_view(const PipelineSession& session, std::optional<SortKey> sort = std::nullopt);

inline constexpr int kSessionSchemaVersion = 1;

/// {"schema_version", "checksum", "session"}; checksum is the SHA-256 of the
/// compact session JSON.
std::string serialize_session(const PipelineSession& session);
/// Throws CorruptSession on malformed input or checksum mismatch.
PipelineSession parse_session(std::string_view document);

void write_session_file(const std::filesystem::path& path, const PipelineSession& session);
/// Throws NotFound or CorruptSession.
PipelineSession read_session_file(const std::filesystem::path& path);

/// One document per session in a directory.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path dir);

    void save(const PipelineSession& session) const;
    PipelineSession load(const std::string& session_id) const;
    bool exists(const std::string& session_id) const;
    std::vector<std::string> list() const;
    std::filesystem::path path_for(const std::string& session_id) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

// =============================================================================
// Search cache
// =============================================================================

class SearchCache {
public:
    using Clock = std::function<std::chrono::system_clock::time_point()>;

    explicit SearchCache(std::chrono::seconds ttl = std::chrono::hours(24), Clock clock = {});

    static std::string key(Source source, std::string_view kind, std::string_view query, std::size_t limit);

    std::optional<SearchBatch> get(const std::string& key) const;
    void put(const std::string& key, SearchBatch batch);
    std::size_t size() const;

private:
    struct Entry {
        std::chrono::system_clock::time_point stored;
        SearchBatch batch;
    };

    std::chrono::seconds ttl_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
};

// =============================================================================
// Runtime wiring
// =============================================================================

struct PipelineServices {
    std::shared_ptr<Transport> s2_transport;
    std::shared_ptr<Transport> openalex_transport;
    std::shared_ptr<LlmBackend> llm;
    ApiCredentials credentials;
    ScholarlyEndpoints endpoints;
    GatewayOptions gateway;
    std::shared_ptr<SearchCache> cache;  // optional
    std::function<std::string()> new_session_id;
    std::function<std::string()> now;
};

enum class BackendMode { Live, Replay, Record };

struct RuntimeOptions {
    BackendMode mode = BackendMode::Live;
    std::filesystem::path cassette_dir;  // Replay and Record
    ApiCredentials credentials;
    ScholarlyEndpoints endpoints;
    LiveLlmOptions llm;
    RetryPolicy retry;
    std::chrono::milliseconds s2_interval{1000};
    std::chrono::milliseconds openalex_interval{100};
    GatewayOptions gateway;
};

/// S2 key from $LITPIPE_S2_API_KEY, contact email from $LITPIPE_CONTACT_EMAIL.
ApiCredentials credentials_from_env();

/// Live: retrying, rate-limited HTTP. Replay: cassettes only. Record: live
/// calls whose exchanges are written to the cassette directory.
PipelineServices make_services(const RuntimeOptions& options);

std::string random_session_id();

// =============================================================================
// Orchestration
// =============================================================================

class Pipeline {
public:
    /// Sessions are persisted when `store` is set.
    Pipeline(PipelineServices services, std::shared_ptr<SessionStore> store = nullptr);

    /// query synthesis -> search and/or seed recommendations -> dedup ->
    /// relevance sort -> top-k -> rerank -> zero-shot draft, then a plan draft
    /// when `plan` is given. A failing stage is recorded in the session, the
    /// session is saved, and the error is rethrown tagged with the stage.
    PipelineSession run_pipeline(const QuerySpec& input, const PipelineConfig& config,
                                 const std::optional<SentencePlan>& plan = std::nullopt);

    /// Appends one draft. `sort` changes the candidate view; with `pin` the
    /// sorted order also becomes the generation order.
    PipelineSession regenerate(const std::string& session_id, const std::optional<SentencePlan>& plan,
                               std::optional<SortKey> sort = std::nullopt, bool pin = false);

    /// As regenerate() on a session held by the caller; nothing is persisted.
    PipelineSession regenerate_session(PipelineSession session, const std::optional<SentencePlan>& plan,
                                       std::optional<SortKey> sort = std::nullopt, bool pin = false);

    void save_session(const PipelineSession& session) const;
    PipelineSession load_session(const std::string& session_id) const;

    const std::shared_ptr<SessionStore>& store() const { return store_; }
    const PipelineServices& services() const { return services_; }

private:
    std::shared_ptr<std::mutex> session_lock(const std::string& session_id);
    SearchBatch cached_search(Source source, std::string_view kind, const std::string& query, std::size_t limit,
                              const std::function<SearchBatch()>& fetch) const;

    PipelineServices services_;
    std::shared_ptr<SessionStore> store_;
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

}  // namespace litpipe
