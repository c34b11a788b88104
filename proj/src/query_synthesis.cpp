#include "litpipe/query_synthesis.hpp"

#include "litpipe/error.hpp"
#include "litpipe/prompts.hpp"
#include "litpipe/text.hpp"

#include <algorithm>
#include <cctype>

namespace litpipe {

bool QuerySpec::has_abstract() const {
    return !text::trim(abstract_text).empty();
}

void QuerySpec::validate() const {
    auto non_blank = [](const std::vector<std::string>& items) {
        return std::any_of(items.begin(), items.end(), [](const std::string& s) { return !text::trim(s).empty(); });
    };
    if (!has_abstract() && !non_blank(user_keywords) && !non_blank(seed_ids)) {
        fail(ErrorCode::InvalidArgument, "an abstract, keywords or a seed paper is required");
    }
}

namespace {

bool is_quote(char c) {
    return c == '"' || c == '\'' || c == '`';
}

std::string_view strip_quotes(std::string_view s) {
    s = text::trim(s);
    while (!s.empty() && is_quote(s.front())) s = text::trim(s.substr(1));
    while (!s.empty() && is_quote(s.back())) s = text::trim(s.substr(0, s.size() - 1));
    // UTF-8 curly quotes
    for (std::string_view q : {"“", "”"}) {
        while (s.starts_with(q)) s = text::trim(s.substr(q.size()));
        while (s.ends_with(q)) s = text::trim(s.substr(0, s.size() - q.size()));
    }
    return s;
}

std::string normalized_word(std::string_view w) {
    while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.front()))) w.remove_prefix(1);
    while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.remove_suffix(1);
    return text::to_lower(w);
}

std::vector<std::string> normalized_words(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& w : text::split_words(s)) {
        auto n = normalized_word(w);
        if (!n.empty()) out.push_back(std::move(n));
    }
    return out;
}

bool contains_phrase(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
    if (needle.empty()) return true;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

}  // namespace

std::string clean_query_output(std::string_view raw, std::size_t max_words) {
    std::string_view line;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto end = raw.find('\n', start);
        auto candidate = text::trim(raw.substr(start, end == std::string_view::npos ? raw.npos : end - start));
        if (!candidate.empty()) {
            line = candidate;
            break;
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }

    line = strip_quotes(line);
    bool stripped = true;
    while (stripped) {
        stripped = false;
        for (std::string_view prefix : {"query:", "keywords:", "keyword query:", "search query:"}) {
            if (text::istarts_with(line, prefix)) {
                line = strip_quotes(line.substr(prefix.size()));
                stripped = true;
            }
        }
    }

    auto words = text::split_words(line);
    if (words.size() > max_words) words.resize(max_words);
    return text::join(words, " ");
}

std::string summarize_abstract_to_query(LlmGateway& gateway, std::string_view abstract,
                                        const QuerySynthesisOptions& options) {
    if (text::trim(abstract).empty()) fail(ErrorCode::EmptyAbstract, "abstract is empty");

    LlmRequest request;
    request.model_name = options.model;
    request.system_text = std::string(prompts::system_text());
    request.user_text = render_prompt(prompts::summarize(), {{"abstract", std::string(text::trim(abstract))},
                                                             {"max_words", std::to_string(options.max_query_words)}});
    request.temperature = options.temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.template_id = prompts::summarize().template_id;
    request.template_version = prompts::summarize().version;

    LlmExchange exchange;
    try {
        exchange = gateway.complete(request);
    } catch (const Error& e) {
        Error wrapped(ErrorCode::LlmFailure, std::string("query synthesis failed: ") + e.what());
        wrapped.subject = std::string(to_string(e.code()));
        wrapped.retry_after = e.retry_after;
        throw wrapped;
    }
    std::string query = clean_query_output(exchange.response_text, options.max_query_words);
    if (query.empty()) fail(ErrorCode::LlmFailure, "query synthesis returned no usable text");
    return query;
}

std::string merge_user_keywords(std::string_view query, const std::vector<std::string>& keywords) {
    std::string out(text::trim(query));
    auto present = normalized_words(out);
    for (const auto& raw : keywords) {
        auto keyword = text::trim(raw);
        auto words = normalized_words(keyword);
        if (words.empty() || contains_phrase(present, words)) continue;
        if (!out.empty()) out.push_back(' ');
        out.append(keyword);
        present.insert(present.end(), words.begin(), words.end());
    }
    return out;
}

}  // namespace litpipe
