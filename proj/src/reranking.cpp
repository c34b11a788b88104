#include "litpipe/reranking.hpp"

#include "litpipe/error.hpp"
#include "litpipe/plan_language.hpp"
#include "litpipe/prompts.hpp"
#include "litpipe/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <regex>
#include <thread>

namespace litpipe {

std::string_view to_string(RankMethod method) {
    switch (method) {
    case RankMethod::Permutation: return "permutation";
    case RankMethod::Debate: return "debate";
    case RankMethod::SourceOrder: return "source_order";
    }
    return "source_order";
}

RankMethod rank_method_from_string(std::string_view name) {
    if (text::iequals(name, "permutation")) return RankMethod::Permutation;
    if (text::iequals(name, "debate")) return RankMethod::Debate;
    if (text::iequals(name, "source_order") || text::iequals(name, "none")) return RankMethod::SourceOrder;
    fail(ErrorCode::InvalidArgument, "unknown rerank method '" + std::string(name) + "'");
}

bool RankedList::is_permutation() const {
    if (order.size() != n) return false;
    std::vector<bool> seen(n + 1, false);
    for (auto i : order) {
        if (i < 1 || i > n || seen[i]) return false;
        seen[i] = true;
    }
    return true;
}

RankedList source_order(std::size_t n) {
    RankedList ranked;
    ranked.n = n;
    ranked.method = RankMethod::SourceOrder;
    for (std::size_t i = 1; i <= n; ++i) ranked.order.push_back(i);
    return ranked;
}

std::vector<PaperRecord> apply_ranking(const std::vector<PaperRecord>& candidates, const RankedList& ranked) {
    if (ranked.n != candidates.size() || !ranked.is_permutation()) {
        fail(ErrorCode::InvalidArgument, "ranking does not match the candidate set");
    }
    std::vector<PaperRecord> out;
    out.reserve(candidates.size());
    for (auto i : ranked.order) out.push_back(candidates[i - 1]);
    return out;
}

// =============================================================================
// Permutation generation
// =============================================================================

namespace {

std::string one_line(std::string_view s) {
    return text::join(text::split_words(s), " ");
}

void add_tag(std::vector<std::string>& tags, std::string_view tag) {
    if (std::find(tags.begin(), tags.end(), tag) == tags.end()) tags.emplace_back(tag);
}

LlmRequest make_request(const PromptTemplate& tmpl, std::string user_text, const RerankOptions& options,
                        int max_output_tokens) {
    LlmRequest request;
    request.model_name = options.model;
    request.system_text = std::string(prompts::system_text());
    request.user_text = std::move(user_text);
    request.temperature = options.temperature;
    request.max_output_tokens = max_output_tokens;
    request.template_id = tmpl.template_id;
    request.template_version = tmpl.version;
    return request;
}

}  // namespace

std::string build_permutation_prompt(std::string_view abstract, const std::vector<PaperRecord>& candidates,
                                     const RerankOptions& options) {
    if (text::trim(abstract).empty()) fail(ErrorCode::EmptyAbstract, "abstract is empty");
    if (candidates.empty()) fail(ErrorCode::InvalidArgument, "nothing to rerank");
    if (candidates.size() > options.max_rerank) {
        fail(ErrorCode::TooManyCandidates, std::to_string(candidates.size()) + " candidates exceed the rerank cap of " +
                                               std::to_string(options.max_rerank));
    }

    std::string listing;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& p = candidates[i];
        if (i > 0) listing += "\n";
        listing += "[" + std::to_string(i + 1) + "] " + one_line(p.title);
        if (p.abstract && !text::trim(*p.abstract).empty()) {
            listing += " — " + text::truncate_utf8(one_line(*p.abstract), options.abstract_char_cap);
        }
    }
    return render_prompt(prompts::rerank_permutation(), {{"abstract", std::string(text::trim(abstract))},
                                                         {"candidates", listing},
                                                         {"count", std::to_string(candidates.size())}});
}

RankedList parse_permutation(std::string_view text, std::size_t n) {
    if (n < 1) fail(ErrorCode::InvalidArgument, "permutation size must be positive");

    RankedList ranked;
    ranked.n = n;
    ranked.method = RankMethod::Permutation;
    std::vector<bool> seen(n + 1, false);
    for (const auto& marker : extract_citation_markers(text)) {
        if (marker.index < 1 || marker.index > n) {
            add_tag(ranked.repairs_applied, kRepairOutOfRange);
            continue;
        }
        auto i = static_cast<std::size_t>(marker.index);
        if (seen[i]) {
            add_tag(ranked.repairs_applied, kRepairDuplicate);
            continue;
        }
        seen[i] = true;
        ranked.order.push_back(i);
    }
    if (ranked.order.empty()) {
        fail(ErrorCode::Unparseable, "no candidate identifier found in ranking output");
    }
    for (std::size_t i = 1; i <= n; ++i) {
        if (!seen[i]) {
            ranked.order.push_back(i);
            add_tag(ranked.repairs_applied, kRepairMissing);
        }
    }
    return ranked;
}

RankedList rerank_by_permutation(LlmGateway& gateway, std::string_view abstract,
                                 const std::vector<PaperRecord>& candidates, const RerankOptions& options) {
    auto request = make_request(prompts::rerank_permutation(), build_permutation_prompt(abstract, candidates, options),
                                options, options.max_output_tokens);
    int attempts = options.reprompt_on_unparseable ? 2 : 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        auto exchange = gateway.complete(request);
        try {
            return parse_permutation(exchange.response_text, candidates.size());
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unparseable) throw;
            spdlog::warn("ranking output of {} was unparseable", exchange.id);
        }
    }
    RankedList ranked = source_order(candidates.size());
    ranked.fallback = true;
    ranked.repairs_applied.emplace_back(kRepairFallback);
    return ranked;
}

// =============================================================================
// Debate ranking
// =============================================================================

DebateVerdict parse_debate(std::string_view text, std::size_t candidate_index) {
    static const std::regex probability(
        R"(probability\s*[:=]\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)\s*(%?))", std::regex::icase);

    DebateVerdict verdict;
    verdict.candidate_index = candidate_index;

    std::string s(text);
    std::optional<double> p;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), probability); it != std::sregex_iterator(); ++it) {
        double value = std::stod((*it)[1].str());
        if ((*it)[2].matched && (*it)[2].length() > 0) value /= 100.0;
        p = value;
    }
    if (!p) fail(ErrorCode::Unparseable, "debate output has no PROBABILITY line");
    if (*p < 0.0 || *p > 1.0) {
        verdict.repairs.emplace_back(kRepairClamped);
        p = std::clamp(*p, 0.0, 1.0);
    }
    verdict.include_probability = *p;

    enum class Section { None, For, Against } section = Section::None;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        std::string_view line = text::trim(std::string_view(s).substr(start, end == std::string::npos ? s.npos : end - start));
        start = end == std::string::npos ? s.size() + 1 : end + 1;

        auto take_label = [&](std::string_view label) {
            if (!text::istarts_with(line, label)) return false;
            line = text::trim(line.substr(label.size()));
            return true;
        };
        if (take_label("for:")) {
            section = Section::For;
        } else if (take_label("against:")) {
            section = Section::Against;
        } else if (text::istarts_with(line, "probability")) {
            section = Section::None;
            continue;
        }
        if (line.empty() || section == Section::None) continue;

        if (line.front() == '-' || line.front() == '*') line = text::trim(line.substr(1));
        else if (line.starts_with("•")) line = text::trim(line.substr(std::string_view("•").size()));
        if (line.empty()) continue;
        (section == Section::For ? verdict.arguments_for : verdict.arguments_against).emplace_back(line);
    }
    return verdict;
}

namespace {

LlmRequest debate_request(std::string_view abstract, const PaperRecord& candidate, const RerankOptions& options) {
    if (text::trim(abstract).empty()) fail(ErrorCode::EmptyAbstract, "abstract is empty");
    // Degraded metadata: debate on the title alone.
    std::string candidate_abstract = candidate.abstract && !text::trim(*candidate.abstract).empty()
                                         ? text::truncate_utf8(one_line(*candidate.abstract), options.abstract_char_cap)
                                         : std::string("(not available)");
    auto user = render_prompt(prompts::debate(),
                              {{"abstract", std::string(text::trim(abstract))},
                               {"title", one_line(candidate.title)},
                               {"candidate_abstract", candidate_abstract}});
    return make_request(prompts::debate(), std::move(user), options, options.debate_max_output_tokens);
}

}  // namespace

DebateVerdict debate_candidate(LlmGateway& gateway, std::string_view abstract, const PaperRecord& candidate,
                               std::size_t candidate_index, const RerankOptions& options) {
    auto exchange = gateway.complete(debate_request(abstract, candidate, options));
    return parse_debate(exchange.response_text, candidate_index);
}

RankedList aggregate_debate(const std::vector<DebateVerdict>& verdicts) {
    std::size_t n = verdicts.size();
    std::vector<bool> seen(n + 1, false);
    for (const auto& v : verdicts) {
        if (v.candidate_index < 1 || v.candidate_index > n || seen[v.candidate_index]) {
            fail(ErrorCode::IncompleteVerdictSet, "verdicts must cover candidates 1.." + std::to_string(n) + " once");
        }
        seen[v.candidate_index] = true;
    }
    if (n == 0) fail(ErrorCode::IncompleteVerdictSet, "no verdicts");

    std::vector<const DebateVerdict*> sorted;
    for (const auto& v : verdicts) sorted.push_back(&v);
    std::sort(sorted.begin(), sorted.end(), [](const DebateVerdict* a, const DebateVerdict* b) {
        if (a->include_probability != b->include_probability) return a->include_probability > b->include_probability;
        return a->candidate_index < b->candidate_index;
    });

    RankedList ranked;
    ranked.n = n;
    ranked.method = RankMethod::Debate;
    for (const auto* v : sorted) {
        ranked.order.push_back(v->candidate_index);
        for (const auto& tag : v->repairs) add_tag(ranked.repairs_applied, tag);
    }
    return ranked;
}

RankedList rerank_by_debate(LlmGateway& gateway, std::string_view abstract, const std::vector<PaperRecord>& candidates,
                            const RerankOptions& options, std::vector<DebateVerdict>* verdicts_out) {
    if (candidates.empty()) fail(ErrorCode::InvalidArgument, "nothing to rerank");
    if (candidates.size() > options.max_rerank) {
        fail(ErrorCode::TooManyCandidates, std::to_string(candidates.size()) + " candidates exceed the rerank cap of " +
                                               std::to_string(options.max_rerank));
    }

    std::vector<LlmRequest> requests;
    for (const auto& c : candidates) requests.push_back(debate_request(abstract, c, options));

    const std::size_t n = candidates.size();
    std::vector<std::optional<LlmExchange>> exchanges(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                exchanges[i] = gateway.call(requests[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        std::size_t workers = std::clamp<std::size_t>(options.debate_concurrency, 1, n);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (exchanges[i]) exchanges[i] = gateway.record(std::move(*exchanges[i]));
    }
    for (const auto& error : errors) {
        if (error) std::rethrow_exception(error);
    }
    std::vector<DebateVerdict> verdicts;
    for (std::size_t i = 0; i < n; ++i) verdicts.push_back(parse_debate(exchanges[i]->response_text, i + 1));
    auto ranked = aggregate_debate(verdicts);
    if (verdicts_out) *verdicts_out = std::move(verdicts);
    return ranked;
}

}  // namespace litpipe
