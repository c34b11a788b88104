#pragma once

#include "litpipe/corpus.hpp"
#include "litpipe/llm_gateway.hpp"
#include "litpipe/plan_language.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe {

/// Citation [i] refers to papers[i-1].
struct GenerationContext {
    std::string abstract_text;
    std::vector<PaperRecord> papers;

    void validate() const;
};

enum class GenerationMode { ZeroShot, Plan };

std::string_view to_string(GenerationMode mode);
GenerationMode generation_mode_from_string(std::string_view name);

struct ReviewDraft {
    std::string text;  // model output, verbatim
    GenerationMode mode = GenerationMode::ZeroShot;
    std::optional<SentencePlan> plan_used;
    std::optional<ComplianceReport> compliance;
    std::set<std::uint64_t> citations_used;
    std::vector<std::uint64_t> unknown_citations;
    std::string exchange_ref;
    std::size_t papers_in_context = 0;
    std::vector<std::string> context_ids;  // canonical id behind each [i]
    std::vector<std::string> warnings;

    bool operator==(const ReviewDraft&) const = default;
};

struct GenerationOptions {
    std::string model = "gpt-4";
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::size_t abstract_char_cap = 1200;
    std::size_t min_papers = 3;  // floor when dropping papers to fit the budget
    bool strict_plan_mode = false;
};

/// "[i] Title (year). Abstract: ..." per paper in order, followed by the
/// instruction to cite only by bracketed number.
std::string build_context_block(const GenerationContext& ctx, std::size_t abstract_char_cap = 1200);

struct FittedPrompt {
    std::string user_text;
    std::size_t papers_included = 0;
    std::vector<std::string> notes;
};

/// Renders `tmpl` with the context block, dropping trailing papers (down to
/// options.min_papers) until the prompt fits the model's context. Throws
/// BudgetExceeded when even the floor does not fit.
FittedPrompt fit_prompt(const LlmGateway& gateway, const GenerationContext& ctx, const PromptTemplate& tmpl,
                        std::map<std::string, std::string> vars, const GenerationOptions& options);

ReviewDraft generate_zero_shot(LlmGateway& gateway, const GenerationContext& ctx,
                               const GenerationOptions& options = {});

/// Throws PlanContextMismatch when the plan cites beyond the context.
ReviewDraft generate_with_plan(LlmGateway& gateway, const GenerationContext& ctx, const SentencePlan& plan,
                               const GenerationOptions& options = {});

}  // namespace litpipe
