#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

// =============================================================================
// Citation markers: the "[i]" surface form shared by reranking, generation
// and compliance checking.
// =============================================================================

struct CitationMarker {
    std::size_t offset = 0;  // byte offset of '['
    std::size_t length = 0;
    std::uint64_t index = 0;  // saturates on overflow
};

std::vector<CitationMarker> extract_citation_markers(std::string_view text);
std::set<std::uint64_t> cited_indices(std::string_view text);

// =============================================================================
// Sentence plans
//
//   plan    := header clause*
//   header  := ("please generate" | "generate the output using") INT
//              ("sentences" | "sentence") ["in" INT ("words" | "word")] "."
//   clause  := "cite" "[" INT "]" ("," "[" INT "]")* ("at" | "on") "line" INT "."
//
// Keywords are case-insensitive and separated by arbitrary whitespace. The
// final period may be omitted at end of input.
// =============================================================================

struct CiteDirective {
    std::size_t line = 1;
    std::vector<std::size_t> cites;

    bool operator==(const CiteDirective&) const = default;
};

struct SentencePlan {
    std::size_t num_sentences = 1;
    std::optional<std::size_t> num_words;
    std::vector<CiteDirective> cite_directives;

    bool operator==(const SentencePlan&) const = default;

    /// Throws PlanLineOutOfRange or DuplicateDirective.
    void validate() const;
    /// Throws PlanContextMismatch when a cite exceeds the context size.
    void check_context(std::size_t n_context) const;
    std::size_t max_cite() const;
};

/// Throws SyntaxError (with byte position), PlanLineOutOfRange or
/// DuplicateDirective.
SentencePlan parse_plan(std::string_view text);

/// Canonical surface form, always using "at line".
std::string render_plan(const SentencePlan& plan);

// =============================================================================
// Segmentation and compliance
// =============================================================================

/// Splits after '.', '!' or '?' when followed by whitespace and an uppercase
/// letter, or by end of text. Never splits inside brackets or after a known
/// abbreviation ("et al.", "Fig.", "e.g.", "i.e.", ...).
std::vector<std::string> split_sentences(std::string_view text);

struct DirectiveCheck {
    std::size_t line = 1;
    std::vector<std::size_t> cites;
    bool satisfied = false;

    bool operator==(const DirectiveCheck&) const = default;
};

struct ComplianceReport {
    std::size_t sentence_count_observed = 0;
    bool sentence_count_ok = false;
    std::size_t word_count_observed = 0;
    bool word_count_within = true;
    std::vector<DirectiveCheck> per_directive;
    std::vector<std::uint64_t> unknown_citations;
    bool fully_compliant = false;

    bool operator==(const ComplianceReport&) const = default;
};

inline constexpr double kWordCountTolerance = 0.20;

/// Pure report; never throws on non-compliance.
ComplianceReport validate_compliance(std::string_view draft_text, const SentencePlan& plan, std::size_t n_context);

/// Markers outside 1..n_context, ascending and distinct.
std::vector<std::uint64_t> unknown_citations(std::string_view text, std::size_t n_context);

}  // namespace litpipe
