#include "litpipe/prompts.hpp"

namespace litpipe::prompts {

std::string_view system_text() {
    return "You are a helpful research assistant who writes precise, factual academic text.";
}

const PromptTemplate& summarize() {
    static const PromptTemplate t{
        "summarize_v1",
        "1",
        R"(You are given the abstract of a research paper or a short description of a research idea.
Summarize the research idea as a keyword query of at most {max_words} words that can be used to search an academic search engine for related papers.
Return only the query on a single line, without quotes or any other text.

Abstract:
{abstract})",
        {"abstract", "max_words"},
    };
    return t;
}

const PromptTemplate& rerank_permutation() {
    static const PromptTemplate t{
        "rerank_permutation_v1",
        "1",
        R"(I will provide you with {count} candidate papers, each indicated by a number identifier in brackets. Rank the candidates based on their relevance to the abstract of the paper below, so that the most useful papers for its related work section come first.

Abstract of the paper:
{abstract}

Candidate papers:
{candidates}

Rank all {count} candidates in descending order of relevance using their identifiers. Every identifier must appear exactly once. Answer only with the ranking in the format [a] > [b] > [c] and do not explain.)",
        {"abstract", "candidates", "count"},
    };
    return t;
}

const PromptTemplate& debate() {
    static const PromptTemplate t{
        "debate_v1",
        "1",
        R"(Decide whether the candidate paper below should be cited in the related work section of the paper whose abstract is given.

Abstract of the paper:
{abstract}

Candidate paper:
Title: {title}
Abstract: {candidate_abstract}

First give arguments for including the candidate, then arguments against including it, and finally the probability of including the candidate based on those arguments. Use exactly this format:
FOR:
- <argument>
AGAINST:
- <argument>
PROBABILITY: <a number between 0 and 1>)",
        {"abstract", "title", "candidate_abstract"},
    };
    return t;
}

const PromptTemplate& rag_zero_shot() {
    static const PromptTemplate t{
        "rag_zero_shot_v1",
        "1",
        R"(You will be given the abstract of a research paper and a numbered list of papers retrieved for it. Write the related work section of the paper.

Abstract of the paper:
{abstract}

{context}

Describe how the listed papers relate to the work in the abstract and to each other, and close by positioning the work in the abstract against them. Cite the papers only with their bracketed numbers, written as [n], and do not mention or cite any paper that is not in the list.)",
        {"abstract", "context"},
    };
    return t;
}

const PromptTemplate& rag_plan() {
    static const PromptTemplate t{
        "rag_plan_v1",
        "1",
        R"(You will be given the abstract of a research paper and a numbered list of papers retrieved for it. Write the related work section of the paper following the sentence plan.

Abstract of the paper:
{abstract}

{context}

Sentence plan: {plan}

Follow the plan exactly: produce the requested number of sentences and place each citation on the requested line, counting sentences from 1. Cite the papers only with their bracketed numbers, written as [n], and do not cite any paper that is not in the list.)",
        {"abstract", "context", "plan"},
    };
    return t;
}

const std::vector<const PromptTemplate*>& all() {
    static const std::vector<const PromptTemplate*> templates{&summarize(), &rerank_permutation(), &debate(),
                                                              &rag_zero_shot(), &rag_plan()};
    return templates;
}

}  // namespace litpipe::prompts
