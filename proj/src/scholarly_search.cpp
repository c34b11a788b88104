#include "litpipe/scholarly_search.hpp"

#include "litpipe/error.hpp"
#include "litpipe/text.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <regex>
#include <set>

namespace litpipe {

using nlohmann::json;

std::string_view to_string(Source source) {
    return source == Source::S2 ? "S2" : "OpenAlex";
}

Source source_from_string(std::string_view name) {
    if (text::iequals(name, "s2") || text::iequals(name, "semanticscholar")) return Source::S2;
    if (text::iequals(name, "openalex")) return Source::OpenAlex;
    fail(ErrorCode::InvalidArgument, "unknown source '" + std::string(name) + "'");
}

const std::vector<std::string>& default_s2_fields() {
    static const std::vector<std::string> fields{"title", "abstract", "year", "citationCount",
                                                 "externalIds", "url", "authors"};
    return fields;
}

std::string normalize_doi(std::string_view doi) {
    std::string d = text::to_lower(text::trim(doi));
    for (std::string_view prefix : {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
                                    "http://dx.doi.org/", "doi:"}) {
        if (d.starts_with(prefix)) {
            d.erase(0, prefix.size());
            break;
        }
    }
    return d;
}

std::string normalize_arxiv(std::string_view arxiv) {
    std::string a = text::to_lower(text::trim(arxiv));
    if (a.starts_with("arxiv:")) a.erase(0, 6);
    static const std::regex version(R"(v\d+$)");
    return std::regex_replace(a, version, "");
}

SeedId parse_seed(std::string_view seed) {
    static const std::regex arxiv_new(R"((?:arxiv:)?(\d{4}\.\d{4,5})(v\d+)?)", std::regex::icase);
    static const std::regex arxiv_old(R"((?:arxiv:)?([a-z\-]+(?:\.[A-Z]{2})?/\d{7})(v\d+)?)", std::regex::icase);
    static const std::regex s2_sha(R"([0-9a-f]{40})");
    static const std::regex corpus_id(R"(CorpusId:\d+)", std::regex::icase);

    std::string s(text::trim(seed));
    std::smatch m;
    if (std::regex_match(s, m, arxiv_new) || std::regex_match(s, m, arxiv_old)) {
        return SeedId{"ArXiv:" + m[1].str(), normalize_arxiv(m[1].str())};
    }
    if (std::regex_match(s, s2_sha)) return SeedId{s, std::nullopt};
    if (std::regex_match(s, corpus_id)) return SeedId{"CorpusId:" + s.substr(9), std::nullopt};

    Error e(ErrorCode::InvalidSeed, "seed '" + s + "' is neither an arXiv id nor a source id");
    e.subject = s;
    throw e;
}

std::string abstract_from_inverted_index(const std::map<std::string, std::vector<int>>& index) {
    std::map<int, std::string> by_position;
    for (const auto& [word, positions] : index) {
        for (int p : positions) by_position[p] = word;
    }
    std::string out;
    for (const auto& [pos, word] : by_position) {
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

namespace {

std::optional<std::string> opt_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

template <typename Int>
std::optional<Int> opt_int(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_integer()) return std::nullopt;
    return it->get<Int>();
}

json parse_body(const HttpResponse& response) {
    json doc = json::parse(response.body, nullptr, false);
    if (doc.is_discarded()) fail(ErrorCode::DecodeError, "upstream response is not valid JSON");
    return doc;
}

void check_status(const HttpResponse& response, std::string_view what, bool not_found_is_error) {
    if (response.status >= 200 && response.status < 300) return;
    if (response.status == 429) {
        Error e(ErrorCode::RateLimited, std::string(what) + ": rate limited (HTTP 429)");
        e.http_status = 429;
        if (auto ra = response.header("retry-after")) {
            try {
                e.retry_after = std::stod(*ra);
            } catch (const std::exception&) {
            }
        }
        throw e;
    }
    if (response.status == 404 && not_found_is_error) {
        Error e(ErrorCode::NotFound, std::string(what) + ": not found");
        e.http_status = 404;
        throw e;
    }
    Error e(ErrorCode::UpstreamError, std::string(what) + ": HTTP " + std::to_string(response.status));
    e.http_status = response.status;
    throw e;
}

bool valid_record(const SourceRecord& r) {
    if (r.source_id.empty()) return false;
    if (text::trim(r.title).empty()) return false;
    if (r.citation_count && *r.citation_count < 0) return false;
    return true;
}

SourceRecord s2_record(const json& item, std::size_t position) {
    SourceRecord r;
    r.source = Source::S2;
    r.source_position = position;
    r.source_id = opt_string(item, "paperId").value_or("");
    r.title = opt_string(item, "title").value_or("");
    r.abstract = opt_string(item, "abstract");
    r.year = opt_int<int>(item, "year");
    r.citation_count = opt_int<long long>(item, "citationCount");
    r.url = opt_string(item, "url");
    if (auto ids = item.find("externalIds"); ids != item.end() && ids->is_object()) {
        if (auto doi = opt_string(*ids, "DOI")) r.external_ids["doi"] = normalize_doi(*doi);
        if (auto arxiv = opt_string(*ids, "ArXiv")) r.external_ids["arxiv"] = normalize_arxiv(*arxiv);
    }
    if (auto authors = item.find("authors"); authors != item.end() && authors->is_array()) {
        for (const auto& a : *authors) {
            if (a.is_object()) {
                if (auto name = opt_string(a, "name")) r.authors.push_back(*name);
            }
        }
    }
    return r;
}

SourceRecord openalex_record(const json& item, std::size_t position) {
    static const std::regex arxiv_url(R"(arxiv\.org/(?:abs|pdf)/([^/?#\s]+?)(?:\.pdf)?$)", std::regex::icase);

    SourceRecord r;
    r.source = Source::OpenAlex;
    r.source_position = position;
    std::string id = opt_string(item, "id").value_or("");
    if (auto slash = id.rfind('/'); slash != std::string::npos) id.erase(0, slash + 1);
    r.source_id = id;
    r.title = opt_string(item, "title").value_or(opt_string(item, "display_name").value_or(""));
    r.year = opt_int<int>(item, "publication_year");
    r.citation_count = opt_int<long long>(item, "cited_by_count");
    if (auto doi = opt_string(item, "doi")) r.external_ids["doi"] = normalize_doi(*doi);

    if (auto inv = item.find("abstract_inverted_index"); inv != item.end() && inv->is_object()) {
        std::map<std::string, std::vector<int>> index;
        for (const auto& [word, positions] : inv->items()) {
            if (!positions.is_array()) continue;
            for (const auto& p : positions) {
                if (p.is_number_integer()) index[word].push_back(p.get<int>());
            }
        }
        r.abstract = abstract_from_inverted_index(index);
    }

    if (auto loc = item.find("primary_location"); loc != item.end() && loc->is_object()) {
        r.url = opt_string(*loc, "landing_page_url");
    }
    if (!r.url && !id.empty()) r.url = opt_string(item, "id");

    if (auto locations = item.find("locations"); locations != item.end() && locations->is_array()) {
        for (const auto& loc : *locations) {
            if (!loc.is_object()) continue;
            auto landing = opt_string(loc, "landing_page_url");
            std::smatch m;
            if (landing && std::regex_search(*landing, m, arxiv_url)) {
                r.external_ids["arxiv"] = normalize_arxiv(m[1].str());
                break;
            }
        }
    }

    if (auto authorships = item.find("authorships"); authorships != item.end() && authorships->is_array()) {
        for (const auto& a : *authorships) {
            if (!a.is_object()) continue;
            if (auto author = a.find("author"); author != a.end() && author->is_object()) {
                if (auto name = opt_string(*author, "display_name")) r.authors.push_back(*name);
            }
        }
    }
    return r;
}

template <typename Mapper>
SearchBatch map_batch(Source source, const json& items, int limit, Mapper&& mapper) {
    SearchBatch batch;
    batch.source = source;
    std::set<std::string> seen;
    std::size_t n = std::min<std::size_t>(items.size(), static_cast<std::size_t>(limit));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& item = items[i];
        if (!item.is_object()) {
            ++batch.dropped;
            continue;
        }
        SourceRecord r = mapper(item, i);
        if (!valid_record(r) || !seen.insert(r.source_id).second) {
            ++batch.dropped;
            continue;
        }
        batch.records.push_back(std::move(r));
    }
    if (batch.dropped > 0) {
        spdlog::warn("{}: dropped {} invalid or duplicate records", to_string(source), batch.dropped);
    }
    return batch;
}

void check_limit(int limit, int max) {
    if (limit < 1 || limit > max) {
        fail(ErrorCode::InvalidArgument, "limit must be within 1.." + std::to_string(max));
    }
}

}  // namespace

// =============================================================================
// Semantic Scholar
// =============================================================================

SemanticScholarClient::SemanticScholarClient(std::shared_ptr<Transport> transport, ApiCredentials credentials,
                                             std::string base_url)
    : transport_(std::move(transport)), credentials_(std::move(credentials)), base_url_(std::move(base_url)) {}

HttpRequest SemanticScholarClient::make_request(std::string method, std::string target) const {
    HttpRequest req;
    req.method = std::move(method);
    req.base_url = base_url_;
    req.target = std::move(target);
    req.headers.emplace_back("User-Agent", credentials_.user_agent);
    if (credentials_.s2_api_key) req.headers.emplace_back("X-API-KEY", *credentials_.s2_api_key);
    return req;
}

SearchBatch SemanticScholarClient::search(std::string_view query, int limit,
                                          const std::vector<std::string>& fields) const {
    if (text::trim(query).empty()) fail(ErrorCode::EmptyQuery, "search query is empty");
    check_limit(limit, 100);

    std::string target = "/graph/v1/paper/search?query=" + text::form_encode(query) +
                         "&limit=" + std::to_string(limit) + "&fields=" + text::form_encode(text::join(fields, ","));
    auto response = transport_->send(make_request("GET", std::move(target)));
    check_status(response, "S2 search", false);

    json doc = parse_body(response);
    if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
        fail(ErrorCode::DecodeError, "S2 search response lacks a \"data\" array");
    }
    auto batch = map_batch(Source::S2, doc["data"], limit, s2_record);
    batch.total = opt_int<long long>(doc, "total");
    return batch;
}

SearchBatch SemanticScholarClient::recommend(std::string_view seed, int limit,
                                             const std::vector<std::string>& fields) const {
    SeedId id = parse_seed(seed);
    check_limit(limit, 500);

    std::string target = "/recommendations/v1/papers/?fields=" + text::form_encode(text::join(fields, ",")) +
                         "&limit=" + std::to_string(limit);
    auto req = make_request("POST", std::move(target));
    // same byte layout as json.dumps({"positivePaperIds": [id]})
    req.body = "{\"positivePaperIds\": [" + json(id.positive_id).dump() + "]}";
    req.content_type = "application/json";
    auto response = transport_->send(req);
    check_status(response, "S2 recommendations", false);

    json doc = parse_body(response);
    if (!doc.is_object() || !doc.contains("recommendedPapers") || !doc["recommendedPapers"].is_array()) {
        fail(ErrorCode::DecodeError, "S2 recommendations response lacks \"recommendedPapers\"");
    }
    auto batch = map_batch(Source::S2, doc["recommendedPapers"], limit, s2_record);
    std::erase_if(batch.records, [&](const SourceRecord& r) {
        if (r.source_id == id.positive_id) return true;
        auto arxiv = r.external_ids.find("arxiv");
        return id.arxiv && arxiv != r.external_ids.end() && arxiv->second == *id.arxiv;
    });
    return batch;
}

SourceRecord SemanticScholarClient::fetch_by_url(std::string_view paper_url,
                                                 const std::vector<std::string>& fields) const {
    static const std::regex absolute(R"([A-Za-z][A-Za-z0-9+.\-]*://[^/\s]+.*)");
    std::string url(text::trim(paper_url));
    if (!std::regex_match(url, absolute)) {
        fail(ErrorCode::InvalidArgument, "paper URL '" + url + "' is not absolute");
    }
    std::string target = "/graph/v1/paper/URL:" + url + "?fields=" + text::form_encode(text::join(fields, ","));
    auto response = transport_->send(make_request("GET", std::move(target)));
    check_status(response, "S2 paper lookup", true);

    json doc = parse_body(response);
    if (!doc.is_object()) fail(ErrorCode::DecodeError, "S2 paper response is not an object");
    SourceRecord r = s2_record(doc, 0);
    if (!valid_record(r)) fail(ErrorCode::DecodeError, "S2 paper record failed validation");
    return r;
}

// =============================================================================
// OpenAlex
// =============================================================================

OpenAlexClient::OpenAlexClient(std::shared_ptr<Transport> transport, ApiCredentials credentials,
                               std::string base_url)
    : transport_(std::move(transport)), credentials_(std::move(credentials)), base_url_(std::move(base_url)) {}

SearchBatch OpenAlexClient::search(std::string_view query, int limit) const {
    if (text::trim(query).empty()) fail(ErrorCode::EmptyQuery, "search query is empty");
    check_limit(limit, 100);

    HttpRequest req;
    req.method = "GET";
    req.base_url = base_url_;
    req.target = "/works?search=" + text::form_encode(query) + "&per-page=" + std::to_string(limit);
    if (credentials_.contact_email) req.target += "&mailto=" + text::form_encode(*credentials_.contact_email);
    req.headers.emplace_back("User-Agent", credentials_.user_agent);

    auto response = transport_->send(req);
    check_status(response, "OpenAlex search", false);

    json doc = parse_body(response);
    if (!doc.is_object() || !doc.contains("results") || !doc["results"].is_array()) {
        fail(ErrorCode::DecodeError, "OpenAlex response lacks a \"results\" array");
    }
    auto batch = map_batch(Source::OpenAlex, doc["results"], limit, openalex_record);
    if (auto meta = doc.find("meta"); meta != doc.end() && meta->is_object()) {
        batch.total = opt_int<long long>(*meta, "count");
    }
    return batch;
}

}  // namespace litpipe
