#pragma once

// JSON forms of the domain types, shared by session files, the HTTP API and
// the CLI's --json output. Enums are written as their lowercase names.

#include "litpipe/corpus.hpp"
#include "litpipe/generation.hpp"
#include "litpipe/llm_gateway.hpp"
#include "litpipe/plan_language.hpp"
#include "litpipe/query_synthesis.hpp"
#include "litpipe/reranking.hpp"
#include "litpipe/scholarly_search.hpp"

#include <json.hpp>

namespace litpipe {

using nlohmann::json;

void to_json(json& j, Source v);
void from_json(const json& j, Source& v);
void to_json(json& j, SortKey v);
void from_json(const json& j, SortKey& v);
void to_json(json& j, RankMethod v);
void from_json(const json& j, RankMethod& v);
void to_json(json& j, GenerationMode v);
void from_json(const json& j, GenerationMode& v);

void to_json(json& j, const SourceRecord& v);
void from_json(const json& j, SourceRecord& v);
void to_json(json& j, const SearchBatch& v);
void to_json(json& j, const PaperRecord& v);
void from_json(const json& j, PaperRecord& v);
void to_json(json& j, const QuerySpec& v);
void from_json(const json& j, QuerySpec& v);
void to_json(json& j, const RankedList& v);
void from_json(const json& j, RankedList& v);
void to_json(json& j, const DebateVerdict& v);
void from_json(const json& j, DebateVerdict& v);

/// Structured fields plus the canonical "text" form.
void to_json(json& j, const SentencePlan& v);
void from_json(const json& j, SentencePlan& v);
void to_json(json& j, const DirectiveCheck& v);
void from_json(const json& j, DirectiveCheck& v);
void to_json(json& j, const ComplianceReport& v);
void from_json(const json& j, ComplianceReport& v);
void to_json(json& j, const ReviewDraft& v);
void from_json(const json& j, ReviewDraft& v);

void to_json(json& j, const LlmRequest& v);
void from_json(const json& j, LlmRequest& v);
void to_json(json& j, const LlmExchange& v);
void from_json(const json& j, LlmExchange& v);

}  // namespace litpipe
