#include "litpipe/plan_language.hpp"

#include "litpipe/error.hpp"
#include "litpipe/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <utility>

namespace litpipe {

// =============================================================================
// Citation markers
// =============================================================================

std::vector<CitationMarker> extract_citation_markers(std::string_view text) {
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::vector<CitationMarker> markers;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '[') continue;
        std::size_t j = i + 1;
        std::uint64_t value = 0;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
            auto digit = static_cast<std::uint64_t>(text[j] - '0');
            value = value > (kMax - digit) / 10 ? kMax : value * 10 + digit;
            ++j;
        }
        if (j > i + 1 && j < text.size() && text[j] == ']') {
            markers.push_back({i, j + 1 - i, value});
            i = j;
        }
    }
    return markers;
}

std::set<std::uint64_t> cited_indices(std::string_view text) {
    std::set<std::uint64_t> out;
    for (const auto& m : extract_citation_markers(text)) out.insert(m.index);
    return out;
}

std::vector<std::uint64_t> unknown_citations(std::string_view text, std::size_t n_context) {
    std::vector<std::uint64_t> out;
    for (auto index : cited_indices(text)) {
        if (index < 1 || index > n_context) out.push_back(index);
    }
    return out;
}

// =============================================================================
// Plan parsing
// =============================================================================

namespace {

class PlanParser {
public:
    explicit PlanParser(std::string_view text) : text_(text) {}

    SentencePlan parse() {
        SentencePlan plan;
        skip_ws();
        if (accept_word("please")) {
            expect_word("generate");
        } else if (accept_word("generate")) {
            expect_word("the");
            expect_word("output");
            expect_word("using");
        } else {
            syntax("expected \"Please generate\"");
        }
        plan.num_sentences = expect_positive_int();
        if (!accept_word("sentences") && !accept_word("sentence")) syntax("expected \"sentences\"");
        if (accept_word("in")) {
            plan.num_words = expect_positive_int();
            if (!accept_word("words") && !accept_word("word")) syntax("expected \"words\"");
        }
        expect_period();

        while (!at_end()) {
            if (!accept_word("cite")) syntax("expected \"Cite\"");
            CiteDirective directive;
            directive.cites.push_back(expect_marker());
            skip_ws();
            while (peek() == ',') {
                ++pos_;
                directive.cites.push_back(expect_marker());
                skip_ws();
            }
            if (!accept_word("at") && !accept_word("on")) syntax("expected \"at line\" or \"on line\"");
            expect_word("line");
            directive.line = expect_positive_int();
            expect_period();
            plan.cite_directives.push_back(std::move(directive));
        }
        return plan;
    }

private:
    [[noreturn]] void syntax(const std::string& what) const {
        Error e(ErrorCode::SyntaxError, what + " at offset " + std::to_string(pos_));
        e.position = pos_;
        throw e;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept_word(std::string_view word) {
        skip_ws();
        if (!text::istarts_with(text_.substr(pos_), word)) return false;
        std::size_t end = pos_ + word.size();
        if (end < text_.size() && std::isalpha(static_cast<unsigned char>(text_[end]))) return false;
        pos_ = end;
        return true;
    }

    void expect_word(std::string_view word) {
        if (!accept_word(word)) syntax("expected \"" + std::string(word) + "\"");
    }

    std::size_t expect_positive_int() {
        skip_ws();
        std::size_t start = pos_;
        std::size_t value = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            auto digit = static_cast<std::size_t>(text_[pos_] - '0');
            if (value > (std::numeric_limits<std::size_t>::max() - digit) / 10) {
                pos_ = start;
                syntax("integer too large");
            }
            value = value * 10 + digit;
            ++pos_;
        }
        if (pos_ == start || value == 0) {
            pos_ = start;
            syntax("expected a positive integer");
        }
        return value;
    }

    std::size_t expect_marker() {
        skip_ws();
        if (peek() != '[') syntax("expected a citation such as [1]");
        ++pos_;
        std::size_t value = expect_positive_int();
        if (peek() != ']') syntax("expected ']'");
        ++pos_;
        return value;
    }

    void expect_period() {
        skip_ws();
        if (peek() == '.') {
            ++pos_;
            return;
        }
        if (pos_ >= text_.size()) return;  // final period is optional
        syntax("expected '.'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

void SentencePlan::validate() const {
    if (num_sentences < 1) fail(ErrorCode::InvalidArgument, "plan needs at least one sentence");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& d : cite_directives) {
        if (d.line < 1 || d.line > num_sentences) {
            Error e(ErrorCode::PlanLineOutOfRange, "directive line " + std::to_string(d.line) +
                                                       " outside 1.." + std::to_string(num_sentences));
            e.subject = std::to_string(d.line);
            throw e;
        }
        if (d.cites.empty()) fail(ErrorCode::InvalidArgument, "directive without citations");
        for (auto cite : d.cites) {
            if (!seen.emplace(d.line, cite).second) {
                Error e(ErrorCode::DuplicateDirective,
                        "[" + std::to_string(cite) + "] is cited twice on line " + std::to_string(d.line));
                e.subject = std::to_string(cite);
                throw e;
            }
        }
    }
}

std::size_t SentencePlan::max_cite() const {
    std::size_t m = 0;
    for (const auto& d : cite_directives) {
        for (auto c : d.cites) m = std::max(m, c);
    }
    return m;
}

void SentencePlan::check_context(std::size_t n_context) const {
    for (const auto& d : cite_directives) {
        for (auto c : d.cites) {
            if (c < 1 || c > n_context) {
                Error e(ErrorCode::PlanContextMismatch, "plan cites [" + std::to_string(c) + "] but only " +
                                                            std::to_string(n_context) + " papers are in context");
                e.subject = std::to_string(c);
                throw e;
            }
        }
    }
}

SentencePlan parse_plan(std::string_view text) {
    if (text::trim(text).empty()) {
        Error e(ErrorCode::SyntaxError, "plan text is empty");
        e.position = 0;
        throw e;
    }
    SentencePlan plan = PlanParser(text).parse();
    plan.validate();
    return plan;
}

std::string render_plan(const SentencePlan& plan) {
    std::string out = "Please generate " + std::to_string(plan.num_sentences) + " sentences";
    if (plan.num_words) out += " in " + std::to_string(*plan.num_words) + " words";
    out += ".";
    for (const auto& d : plan.cite_directives) {
        out += " Cite ";
        for (std::size_t i = 0; i < d.cites.size(); ++i) {
            if (i > 0) out += ", ";
            out += "[" + std::to_string(d.cites[i]) + "]";
        }
        out += " at line " + std::to_string(d.line) + ".";
    }
    return out;
}

// =============================================================================
// Sentence segmentation
// =============================================================================

namespace {

constexpr std::array<std::string_view, 24> kAbbreviations{
    "al.", "fig.", "figs.", "e.g.", "i.e.", "eq.", "eqs.", "cf.", "vs.", "sec.", "tab.", "ref.",
    "refs.", "no.", "vol.", "pp.", "approx.", "resp.", "dr.", "mr.", "mrs.", "ms.", "prof.", "st.",
};

bool is_terminator(char c) {
    return c == '.' || c == '!' || c == '?';
}

bool is_closer(char c) {
    return c == '"' || c == '\'' || c == ')';
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

/// The whitespace-delimited token ending at `end` (inclusive).
std::string_view token_ending_at(std::string_view text, std::size_t end) {
    std::size_t begin = end;
    while (begin > 0 && !is_space(text[begin - 1])) --begin;
    return text.substr(begin, end + 1 - begin);
}

bool is_abbreviation(std::string_view token) {
    while (!token.empty() && (token.front() == '(' || token.front() == '"')) token.remove_prefix(1);
    auto lower = text::to_lower(token);
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    auto push = [&](std::size_t from, std::size_t to) {
        auto piece = text::trim(text.substr(from, to - from));
        if (!piece.empty()) sentences.emplace_back(piece);
    };

    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '[') {
            ++depth;
            continue;
        }
        if (c == ']') {
            if (depth > 0) --depth;
            continue;
        }
        if (depth > 0 || !is_terminator(c)) continue;

        std::size_t last = i;
        while (last + 1 < text.size() && is_terminator(text[last + 1])) ++last;
        while (last + 1 < text.size() && is_closer(text[last + 1])) ++last;

        std::size_t next = last + 1;
        bool boundary = false;
        if (next >= text.size()) {
            boundary = true;
        } else if (is_space(text[next])) {
            std::size_t k = next;
            while (k < text.size() && is_space(text[k])) ++k;
            boundary = k >= text.size() || std::isupper(static_cast<unsigned char>(text[k]));
        }
        if (boundary && c == '.' && last == i && is_abbreviation(token_ending_at(text, i))) boundary = false;

        if (boundary) {
            push(start, last + 1);
            start = last + 1;
        }
        i = last;
    }
    push(start, text.size());
    return sentences;
}

// =============================================================================
// Compliance
// =============================================================================

ComplianceReport validate_compliance(std::string_view draft_text, const SentencePlan& plan, std::size_t n_context) {
    ComplianceReport report;
    auto sentences = split_sentences(draft_text);
    report.sentence_count_observed = sentences.size();
    report.sentence_count_ok = sentences.size() == plan.num_sentences;

    report.word_count_observed = text::count_words(draft_text);
    if (plan.num_words) {
        double target = static_cast<double>(*plan.num_words);
        double diff = std::abs(static_cast<double>(report.word_count_observed) - target);
        report.word_count_within = diff <= kWordCountTolerance * target + 1e-9;
    }

    bool all_directives = true;
    for (const auto& d : plan.cite_directives) {
        DirectiveCheck check{d.line, d.cites, false};
        if (d.line >= 1 && d.line <= sentences.size()) {
            auto present = cited_indices(sentences[d.line - 1]);
            check.satisfied = std::all_of(d.cites.begin(), d.cites.end(),
                                          [&](std::size_t c) { return present.contains(c); });
        }
        all_directives = all_directives && check.satisfied;
        report.per_directive.push_back(std::move(check));
    }

    report.unknown_citations = unknown_citations(draft_text, n_context);
    report.fully_compliant = report.sentence_count_ok && all_directives && report.unknown_citations.empty();
    return report;
}

}  // namespace litpipe
