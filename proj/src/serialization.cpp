#include "litpipe/serialization.hpp"

namespace litpipe {

namespace {

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_opt(const json& j, const char* key, std::optional<T>& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        out.reset();
    } else {
        out = it->template get<T>();
    }
}

template <typename T>
void get_or(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->template get<T>();
}

}  // namespace

void to_json(json& j, Source v) { j = std::string(to_string(v)); }
void from_json(const json& j, Source& v) { v = source_from_string(j.get<std::string>()); }
void to_json(json& j, SortKey v) { j = std::string(to_string(v)); }
void from_json(const json& j, SortKey& v) { v = sort_key_from_string(j.get<std::string>()); }
void to_json(json& j, RankMethod v) { j = std::string(to_string(v)); }
void from_json(const json& j, RankMethod& v) { v = rank_method_from_string(j.get<std::string>()); }
void to_json(json& j, GenerationMode v) { j = std::string(to_string(v)); }
void from_json(const json& j, GenerationMode& v) { v = generation_mode_from_string(j.get<std::string>()); }

void to_json(json& j, const SourceRecord& v) {
    j = json{{"source", v.source},          {"source_id", v.source_id},       {"title", v.title},
             {"external_ids", v.external_ids}, {"authors", v.authors},       {"source_position", v.source_position}};
    put_opt(j, "abstract", v.abstract);
    put_opt(j, "year", v.year);
    put_opt(j, "citation_count", v.citation_count);
    put_opt(j, "url", v.url);
}

void from_json(const json& j, SourceRecord& v) {
    v.source = j.at("source").get<Source>();
    v.source_id = j.at("source_id").get<std::string>();
    v.title = j.at("title").get<std::string>();
    get_or(j, "external_ids", v.external_ids);
    get_or(j, "authors", v.authors);
    get_or(j, "source_position", v.source_position);
    get_opt(j, "abstract", v.abstract);
    get_opt(j, "year", v.year);
    get_opt(j, "citation_count", v.citation_count);
    get_opt(j, "url", v.url);
}

void to_json(json& j, const SearchBatch& v) {
    j = json{{"source", v.source}, {"records", v.records}, {"dropped", v.dropped}};
    put_opt(j, "total", v.total);
}

void to_json(json& j, const PaperRecord& v) {
    j = json{{"canonical_id", v.canonical_id}, {"external_ids", v.external_ids},
             {"title", v.title},               {"authors", v.authors},
             {"sources", v.sources},           {"best_source_position", v.best_source_position}};
    put_opt(j, "abstract", v.abstract);
    put_opt(j, "year", v.year);
    put_opt(j, "citation_count", v.citation_count);
    put_opt(j, "url", v.url);
}

void from_json(const json& j, PaperRecord& v) {
    v.canonical_id = j.at("canonical_id").get<std::string>();
    v.title = j.at("title").get<std::string>();
    get_or(j, "external_ids", v.external_ids);
    get_or(j, "authors", v.authors);
    get_or(j, "sources", v.sources);
    get_or(j, "best_source_position", v.best_source_position);
    get_opt(j, "abstract", v.abstract);
    get_opt(j, "year", v.year);
    get_opt(j, "citation_count", v.citation_count);
    get_opt(j, "url", v.url);
}

void to_json(json& j, const QuerySpec& v) {
    j = json{{"abstract_text", v.abstract_text}, {"user_keywords", v.user_keywords}, {"seed_ids", v.seed_ids}};
    put_opt(j, "synthesized_query", v.synthesized_query);
}

void from_json(const json& j, QuerySpec& v) {
    v = QuerySpec{};
    get_or(j, "abstract_text", v.abstract_text);
    get_or(j, "user_keywords", v.user_keywords);
    get_or(j, "seed_ids", v.seed_ids);
    get_opt(j, "synthesized_query", v.synthesized_query);
}

void to_json(json& j, const RankedList& v) {
    j = json{{"order", v.order},
             {"n", v.n},
             {"method", v.method},
             {"repairs_applied", v.repairs_applied},
             {"fallback", v.fallback}};
}

void from_json(const json& j, RankedList& v) {
    v.order = j.at("order").get<std::vector<std::size_t>>();
    v.n = j.at("n").get<std::size_t>();
    v.method = j.at("method").get<RankMethod>();
    get_or(j, "repairs_applied", v.repairs_applied);
    get_or(j, "fallback", v.fallback);
}

void to_json(json& j, const DebateVerdict& v) {
    j = json{{"candidate_index", v.candidate_index},
             {"arguments_for", v.arguments_for},
             {"arguments_against", v.arguments_against},
             {"include_probability", v.include_probability},
             {"repairs", v.repairs}};
}

void from_json(const json& j, DebateVerdict& v) {
    v.candidate_index = j.at("candidate_index").get<std::size_t>();
    v.include_probability = j.at("include_probability").get<double>();
    get_or(j, "arguments_for", v.arguments_for);
    get_or(j, "arguments_against", v.arguments_against);
    get_or(j, "repairs", v.repairs);
}

void to_json(json& j, const SentencePlan& v) {
    json directives = json::array();
    for (const auto& d : v.cite_directives) directives.push_back({{"line", d.line}, {"cites", d.cites}});
    j = json{{"text", render_plan(v)}, {"num_sentences", v.num_sentences}, {"cite_directives", directives}};
    put_opt(j, "num_words", v.num_words);
}

void from_json(const json& j, SentencePlan& v) {
    v = SentencePlan{};
    v.num_sentences = j.at("num_sentences").get<std::size_t>();
    get_opt(j, "num_words", v.num_words);
    for (const auto& d : j.at("cite_directives")) {
        v.cite_directives.push_back({d.at("line").get<std::size_t>(), d.at("cites").get<std::vector<std::size_t>>()});
    }
}

void to_json(json& j, const DirectiveCheck& v) {
    j = json{{"line", v.line}, {"cites", v.cites}, {"satisfied", v.satisfied}};
}

void from_json(const json& j, DirectiveCheck& v) {
    v.line = j.at("line").get<std::size_t>();
    v.cites = j.at("cites").get<std::vector<std::size_t>>();
    v.satisfied = j.at("satisfied").get<bool>();
}

void to_json(json& j, const ComplianceReport& v) {
    j = json{{"sentence_count_observed", v.sentence_count_observed},
             {"sentence_count_ok", v.sentence_count_ok},
             {"word_count_observed", v.word_count_observed},
             {"word_count_within", v.word_count_within},
             {"per_directive", v.per_directive},
             {"unknown_citations", v.unknown_citations},
             {"fully_compliant", v.fully_compliant}};
}

void from_json(const json& j, ComplianceReport& v) {
    v.sentence_count_observed = j.at("sentence_count_observed").get<std::size_t>();
    v.sentence_count_ok = j.at("sentence_count_ok").get<bool>();
    v.word_count_observed = j.at("word_count_observed").get<std::size_t>();
    v.word_count_within = j.at("word_count_within").get<bool>();
    v.per_directive = j.at("per_directive").get<std::vector<DirectiveCheck>>();
    v.unknown_citations = j.at("unknown_citations").get<std::vector<std::uint64_t>>();
    v.fully_compliant = j.at("fully_compliant").get<bool>();
}

void to_json(json& j, const ReviewDraft& v) {
    j = json{{"text", v.text},
             {"mode", v.mode},
             {"citations_used", v.citations_used},
             {"unknown_citations", v.unknown_citations},
             {"exchange_ref", v.exchange_ref},
             {"papers_in_context", v.papers_in_context},
             {"context_ids", v.context_ids},
             {"warnings", v.warnings}};
    put_opt(j, "plan_used", v.plan_used);
    put_opt(j, "compliance", v.compliance);
}

void from_json(const json& j, ReviewDraft& v) {
    v = ReviewDraft{};
    v.text = j.at("text").get<std::string>();
    v.mode = j.at("mode").get<GenerationMode>();
    v.exchange_ref = j.at("exchange_ref").get<std::string>();
    get_or(j, "citations_used", v.citations_used);
    get_or(j, "unknown_citations", v.unknown_citations);
    get_or(j, "papers_in_context", v.papers_in_context);
    get_or(j, "context_ids", v.context_ids);
    get_or(j, "warnings", v.warnings);
    get_opt(j, "plan_used", v.plan_used);
    get_opt(j, "compliance", v.compliance);
}

void to_json(json& j, const LlmRequest& v) {
    j = json{{"model_name", v.model_name},
             {"user_text", v.user_text},
             {"temperature", v.temperature},
             {"max_output_tokens", v.max_output_tokens},
             {"template_id", v.template_id},
             {"template_version", v.template_version}};
    put_opt(j, "system_text", v.system_text);
}

void from_json(const json& j, LlmRequest& v) {
    v = LlmRequest{};
    v.model_name = j.at("model_name").get<std::string>();
    v.user_text = j.at("user_text").get<std::string>();
    v.temperature = j.at("temperature").get<double>();
    get_or(j, "max_output_tokens", v.max_output_tokens);
    get_or(j, "template_id", v.template_id);
    get_or(j, "template_version", v.template_version);
    get_opt(j, "system_text", v.system_text);
}

void to_json(json& j, const LlmExchange& v) {
    j = json{{"id", v.id},
             {"request", v.request},
             {"response_text", v.response_text},
             {"latency_ms", v.latency_ms},
             {"provider", v.provider},
             {"timestamp", v.timestamp},
             {"cassette_key", v.cassette_key}};
}

void from_json(const json& j, LlmExchange& v) {
    v.id = j.at("id").get<std::string>();
    v.request = j.at("request").get<LlmRequest>();
    v.response_text = j.at("response_text").get<std::string>();
    get_or(j, "latency_ms", v.latency_ms);
    get_or(j, "provider", v.provider);
    get_or(j, "timestamp", v.timestamp);
    get_or(j, "cassette_key", v.cassette_key);
}

}  // namespace litpipe
