#pragma once

#include "litpipe/llm_gateway.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

struct QuerySpec {
    std::string abstract_text;
    std::vector<std::string> user_keywords;
    std::vector<std::string> seed_ids;
    std::optional<std::string> synthesized_query;

    bool operator==(const QuerySpec&) const = default;

    bool has_abstract() const;
    /// Throws InvalidArgument when abstract, keywords and seeds are all empty.
    void validate() const;
};

struct QuerySynthesisOptions {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_output_tokens = 64;
    std::size_t max_query_words = 12;
};

/// Normalizes raw LLM output into a single-line keyword query: first
/// non-empty line, "Query:"/"Keywords:" prefixes and surrounding quotes
/// stripped, capped at `max_words` words.
std::string clean_query_output(std::string_view raw, std::size_t max_words);

/// Throws EmptyAbstract; gateway failures surface as LlmFailure.
std::string summarize_abstract_to_query(LlmGateway& gateway, std::string_view abstract,
                                        const QuerySynthesisOptions& options = {});

/// Appends keywords not already contained (case-insensitively) in the query.
std::string merge_user_keywords(std::string_view query, const std::vector<std::string>& keywords);

}  // namespace litpipe
