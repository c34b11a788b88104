#pragma once

#include "litpipe/corpus.hpp"
#include "litpipe/llm_gateway.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

enum class RankMethod { Permutation, Debate, SourceOrder };

std::string_view to_string(RankMethod method);
RankMethod rank_method_from_string(std::string_view name);

/// Repair tags recorded by parse_permutation.
inline constexpr std::string_view kRepairOutOfRange = "R1";   // dropped index outside 1..n
inline constexpr std::string_view kRepairDuplicate = "R2";    // dropped repeated index
inline constexpr std::string_view kRepairMissing = "R3";      // appended missing indices
inline constexpr std::string_view kRepairFallback = "fallback:source-order";
inline constexpr std::string_view kRepairClamped = "clamped";

/// A permutation of the 1-based candidate indices 1..n.
struct RankedList {
    std::vector<std::size_t> order;
    std::size_t n = 0;
    RankMethod method = RankMethod::SourceOrder;
    std::vector<std::string> repairs_applied;
    bool fallback = false;

    bool operator==(const RankedList&) const = default;

    bool is_permutation() const;
};

RankedList source_order(std::size_t n);

/// Candidates reordered by `ranked`.
std::vector<PaperRecord> apply_ranking(const std::vector<PaperRecord>& candidates, const RankedList& ranked);

struct DebateVerdict {
    std::size_t candidate_index = 1;
    std::vector<std::string> arguments_for;
    std::vector<std::string> arguments_against;
    double include_probability = 0.0;
    std::vector<std::string> repairs;

    bool operator==(const DebateVerdict&) const = default;
};

struct RerankOptions {
    std::string model = "gpt-4";
    double temperature = 0.0;
    int max_output_tokens = 256;
    int debate_max_output_tokens = 512;
    std::size_t max_rerank = 10;
    std::size_t abstract_char_cap = 1200;
    bool reprompt_on_unparseable = false;
    std::size_t debate_concurrency = 4;
};

/// Enumerates candidates as "[i] title — abstract" and asks for a
/// "[a] > [b] > ..." permutation. Throws TooManyCandidates / EmptyAbstract.
std::string build_permutation_prompt(std::string_view abstract, const std::vector<PaperRecord>& candidates,
                                     const RerankOptions& options = {});

/// Extracts "[k]" markers in order and repairs them into a permutation of
/// 1..n (R1 drop out-of-range, R2 drop repeats, R3 append missing in input
/// order). Throws Unparseable when no in-range marker exists.
RankedList parse_permutation(std::string_view text, std::size_t n);

/// build -> complete -> parse; an unparseable reply falls back to source order.
RankedList rerank_by_permutation(LlmGateway& gateway, std::string_view abstract,
                                 const std::vector<PaperRecord>& candidates, const RerankOptions& options = {});

/// Parses labelled FOR:/AGAINST: lists and a "PROBABILITY: p" line (last
/// one wins, clamped to [0,1]). Throws Unparseable without a probability.
DebateVerdict parse_debate(std::string_view text, std::size_t candidate_index);

DebateVerdict debate_candidate(LlmGateway& gateway, std::string_view abstract, const PaperRecord& candidate,
                               std::size_t candidate_index, const RerankOptions& options = {});

/// Orders by include_probability descending, ties by ascending index.
/// Throws IncompleteVerdictSet unless indices 1..n each appear once.
RankedList aggregate_debate(const std::vector<DebateVerdict>& verdicts);

/// One debate call per candidate, at most `debate_concurrency` in flight.
/// Exchanges are recorded in candidate order.
RankedList rerank_by_debate(LlmGateway& gateway, std::string_view abstract,
                            const std::vector<PaperRecord>& candidates, const RerankOptions& options = {},
                            std::vector<DebateVerdict>* verdicts_out = nullptr);

}  // namespace litpipe
