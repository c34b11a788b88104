#include "litpipe/generation.hpp"

#include "litpipe/error.hpp"
#include "litpipe/prompts.hpp"
#include "litpipe/text.hpp"

#include <spdlog/spdlog.h>

namespace litpipe {

void GenerationContext::validate() const {
    if (papers.empty()) fail(ErrorCode::InvalidArgument, "generation context has no papers");
}

std::string_view to_string(GenerationMode mode) {
    return mode == GenerationMode::Plan ? "plan" : "zero_shot";
}

GenerationMode generation_mode_from_string(std::string_view name) {
    if (text::iequals(name, "plan")) return GenerationMode::Plan;
    if (text::iequals(name, "zero_shot")) return GenerationMode::ZeroShot;
    fail(ErrorCode::InvalidArgument, "unknown generation mode '" + std::string(name) + "'");
}

std::string build_context_block(const GenerationContext& ctx, std::size_t abstract_char_cap) {
    ctx.validate();
    std::string block = "Retrieved papers:\n";
    for (std::size_t i = 0; i < ctx.papers.size(); ++i) {
        const auto& p = ctx.papers[i];
        block += "[" + std::to_string(i + 1) + "] " + text::join(text::split_words(p.title), " ");
        if (p.year) block += " (" + std::to_string(*p.year) + ")";
        block += ". Abstract: ";
        if (p.abstract && !text::trim(*p.abstract).empty()) {
            block += text::truncate_utf8(text::join(text::split_words(*p.abstract), " "), abstract_char_cap);
        } else {
            block += "(not available)";
        }
        block += "\n";
    }
    block += "\nCite these papers only by their bracketed numbers from the list above.";
    return block;
}

FittedPrompt fit_prompt(const LlmGateway& gateway, const GenerationContext& ctx, const PromptTemplate& tmpl,
                        std::map<std::string, std::string> vars, const GenerationOptions& options) {
    ctx.validate();
    const std::size_t n = ctx.papers.size();
    const std::size_t floor = std::min(n, std::max<std::size_t>(options.min_papers, 1));
    const std::size_t limit = gateway.context_limit(options.model);
    const std::size_t system_tokens = gateway.estimate(prompts::system_text());

    FittedPrompt fitted;
    for (std::size_t k = n; k >= floor && k > 0; --k) {
        GenerationContext sub{ctx.abstract_text, {ctx.papers.begin(), ctx.papers.begin() + static_cast<std::ptrdiff_t>(k)}};
        vars["context"] = build_context_block(sub, options.abstract_char_cap);
        std::string user = render_prompt(tmpl, vars);
        if (system_tokens + gateway.estimate(user) <= limit) {
            fitted.user_text = std::move(user);
            fitted.papers_included = k;
            if (k < n) {
                fitted.notes.push_back("dropped " + std::to_string(n - k) +
                                       " trailing paper(s) to fit the context budget of " + options.model);
                spdlog::warn("{}", fitted.notes.back());
            }
            return fitted;
        }
    }
    fail(ErrorCode::BudgetExceeded, "context block does not fit " + options.model + " even with " +
                                        std::to_string(floor) + " papers");
}

namespace {

LlmRequest make_request(const PromptTemplate& tmpl, std::string user_text, const GenerationOptions& options) {
    LlmRequest request;
    request.model_name = options.model;
    request.system_text = std::string(prompts::system_text());
    request.user_text = std::move(user_text);
    request.temperature = options.temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.template_id = tmpl.template_id;
    request.template_version = tmpl.version;
    return request;
}

ReviewDraft draft_from(const LlmExchange& exchange, GenerationMode mode, const GenerationContext& ctx,
                       std::size_t n_context, std::vector<std::string> notes) {
    ReviewDraft draft;
    draft.text = exchange.response_text;
    draft.mode = mode;
    draft.citations_used = cited_indices(draft.text);
    draft.unknown_citations = unknown_citations(draft.text, n_context);
    draft.exchange_ref = exchange.id;
    draft.papers_in_context = n_context;
    for (std::size_t i = 0; i < n_context; ++i) draft.context_ids.push_back(ctx.papers[i].canonical_id);
    draft.warnings = std::move(notes);
    if (draft.citations_used.empty()) draft.warnings.emplace_back("draft contains no citation markers");
    for (auto u : draft.unknown_citations) {
        draft.warnings.push_back("hallucinated citation [" + std::to_string(u) + "]");
    }
    return draft;
}

}  // namespace

ReviewDraft generate_zero_shot(LlmGateway& gateway, const GenerationContext& ctx, const GenerationOptions& options) {
    const auto& tmpl = prompts::rag_zero_shot();
    auto fitted = fit_prompt(gateway, ctx, tmpl, {{"abstract", std::string(text::trim(ctx.abstract_text))}}, options);
    auto exchange = gateway.complete(make_request(tmpl, std::move(fitted.user_text), options));
    return draft_from(exchange, GenerationMode::ZeroShot, ctx, fitted.papers_included, std::move(fitted.notes));
}

ReviewDraft generate_with_plan(LlmGateway& gateway, const GenerationContext& ctx, const SentencePlan& plan,
                               const GenerationOptions& options) {
    ctx.validate();
    plan.validate();
    plan.check_context(ctx.papers.size());

    const auto& tmpl = prompts::rag_plan();
    auto fitted = fit_prompt(gateway, ctx, tmpl,
                             {{"abstract", std::string(text::trim(ctx.abstract_text))}, {"plan", render_plan(plan)}},
                             options);
    plan.check_context(fitted.papers_included);

    auto request = make_request(tmpl, std::move(fitted.user_text), options);
    int attempts = options.strict_plan_mode ? 2 : 1;
    ReviewDraft draft;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        auto exchange = gateway.complete(request);
        draft = draft_from(exchange, GenerationMode::Plan, ctx, fitted.papers_included, fitted.notes);
        draft.plan_used = plan;
        draft.compliance = validate_compliance(draft.text, plan, fitted.papers_included);
        if (draft.compliance->fully_compliant) break;
        if (attempt + 1 < attempts) spdlog::info("draft {} is not plan-compliant; retrying once", exchange.id);
    }
    if (!draft.compliance->fully_compliant) draft.warnings.emplace_back("draft does not fully comply with the plan");
    return draft;
}

}  // namespace litpipe
