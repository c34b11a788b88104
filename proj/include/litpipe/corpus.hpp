#pragma once

#include "litpipe/scholarly_search.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

/// Canonical candidate paper, possibly merged from several sources.
struct PaperRecord {
    std::string canonical_id;
    std::map<std::string, std::string> external_ids;
    std::string title;
    std::optional<std::string> abstract;
    std::optional<int> year;
    std::optional<long long> citation_count;
    std::optional<std::string> url;
    std::vector<std::string> authors;
    std::set<Source> sources;
    std::size_t best_source_position = 0;

    bool operator==(const PaperRecord&) const = default;
};

enum class SortKey { Relevance, CitationCount, Year };

std::string_view to_string(SortKey key);
/// Accepts "relevance", "citations"/"citation_count", "year".
SortKey sort_key_from_string(std::string_view name);

/// Lowercase, punctuation removed, whitespace collapsed and trimmed.
std::string normalize_title(std::string_view title);

/// Lifts a single source record; canonical id is "<source>:<source_id>".
PaperRecord to_paper(const SourceRecord& record);

/// Merges records that share a DOI, else an arXiv id, else a normalized
/// title. Field values follow S2 > OpenAlex precedence with gaps filled from
/// the other source. Output is ordered by best_source_position, earlier
/// batches winning ties.
std::vector<PaperRecord> merge_and_dedup(const std::vector<std::vector<SourceRecord>>& batches);

/// Re-applies deduplication to an already merged list.
std::vector<PaperRecord> merge_and_dedup(const std::vector<PaperRecord>& papers);

/// Stable. Relevance ascends by best_source_position; CitationCount and
/// Year descend with absent values last.
std::vector<PaperRecord> sort_papers(const std::vector<PaperRecord>& papers, SortKey key);

std::vector<PaperRecord> truncate_candidates(const std::vector<PaperRecord>& papers, std::size_t k);

/// True when the two records would be merged by deduplication.
bool same_work(const PaperRecord& a, const PaperRecord& b);

}  // namespace litpipe
