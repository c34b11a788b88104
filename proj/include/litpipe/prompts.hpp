#pragma once

#include "litpipe/llm_gateway.hpp"

#include <string_view>
#include <vector>

namespace litpipe::prompts {

// Built-in versioned templates. Editing a body must bump its version so that
// recorded cassettes are invalidated.
const PromptTemplate& summarize();            // summarize_v1
const PromptTemplate& rerank_permutation();   // rerank_permutation_v1
const PromptTemplate& debate();               // debate_v1
const PromptTemplate& rag_zero_shot();        // rag_zero_shot_v1
const PromptTemplate& rag_plan();             // rag_plan_v1

/// System message shared by every stage.
std::string_view system_text();

const std::vector<const PromptTemplate*>& all();

}  // namespace litpipe::prompts
