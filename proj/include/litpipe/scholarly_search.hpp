#pragma once

#include "litpipe/transport.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

enum class Source { S2, OpenAlex };

std::string_view to_string(Source source);
Source source_from_string(std::string_view name);

struct SourceRecord {
    Source source = Source::S2;
    std::string source_id;
    std::string title;
    std::optional<std::string> abstract;
    std::optional<int> year;
    std::optional<long long> citation_count;
    std::map<std::string, std::string> external_ids;  // "doi", "arxiv"
    std::optional<std::string> url;
    std::vector<std::string> authors;
    std::size_t source_position = 0;

    bool operator==(const SourceRecord&) const = default;
};

/// One upstream response after validation.
struct SearchBatch {
    Source source = Source::S2;
    std::vector<SourceRecord> records;
    std::optional<long long> total;  // upstream hit count, when reported
    std::size_t dropped = 0;         // records failing validation
};

struct ApiCredentials {
    std::optional<std::string> s2_api_key;
    std::string user_agent = "litpipe/0.1";
    std::optional<std::string> contact_email;
};

struct ScholarlyEndpoints {
    std::string s2_base = "https://api.semanticscholar.org";
    std::string openalex_base = "https://api.openalex.org";
};

/// title,abstract,year,citationCount,externalIds,url,authors
const std::vector<std::string>& default_s2_fields();

/// Normalized seed: the id string sent in "positivePaperIds", plus the arXiv
/// id when the seed is an arXiv identifier.
struct SeedId {
    std::string positive_id;
    std::optional<std::string> arxiv;
};

/// Accepts arXiv ids (new and old style, optional "arXiv:" prefix and
/// version suffix), 40-hex S2 paper ids and "CorpusId:<n>". Throws InvalidSeed.
SeedId parse_seed(std::string_view seed);

std::string normalize_doi(std::string_view doi);
std::string normalize_arxiv(std::string_view arxiv);

/// Reconstructs text from OpenAlex's {word: [positions]} representation.
std::string abstract_from_inverted_index(const std::map<std::string, std::vector<int>>& index);

class SemanticScholarClient {
public:
    SemanticScholarClient(std::shared_ptr<Transport> transport, ApiCredentials credentials,
                          std::string base_url = ScholarlyEndpoints{}.s2_base);

    SearchBatch search(std::string_view query, int limit,
                       const std::vector<std::string>& fields = default_s2_fields()) const;

    SearchBatch recommend(std::string_view seed, int limit,
                          const std::vector<std::string>& fields = default_s2_fields()) const;

    SourceRecord fetch_by_url(std::string_view paper_url,
                              const std::vector<std::string>& fields = default_s2_fields()) const;

private:
    HttpRequest make_request(std::string method, std::string target) const;

    std::shared_ptr<Transport> transport_;
    ApiCredentials credentials_;
    std::string base_url_;
};

class OpenAlexClient {
public:
    OpenAlexClient(std::shared_ptr<Transport> transport, ApiCredentials credentials,
                   std::string base_url = ScholarlyEndpoints{}.openalex_base);

    SearchBatch search(std::string_view query, int limit) const;

private:
    std::shared_ptr<Transport> transport_;
    ApiCredentials credentials_;
    std::string base_url_;
};

}  // namespace litpipe
