#include "litpipe/plan_language.hpp"
#include "litpipe/reranking.hpp"

#include "litpipe/text.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <thread>

using namespace litpipe;
using namespace oracles;
using testsupport::capture_error;

namespace {

/// Answers through a callable; safe for concurrent use when the callable is.
class LambdaLlm final : public LlmBackend {
public:
    explicit LambdaLlm(std::function<std::string(const LlmRequest&)> fn) : fn_(std::move(fn)) {}
    BackendReply complete(const LlmRequest& request) override { return {fn_(request), 1.0, "test", std::nullopt}; }

private:
    std::function<std::string(const LlmRequest&)> fn_;
};

LlmGateway gateway_for(std::shared_ptr<LlmBackend> backend) { return LlmGateway(std::move(backend), {}, nullptr); }

std::vector<PaperRecord> candidates(std::size_t n) {
    std::vector<PaperRecord> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(testsupport::paper("S2:" + std::to_string(i + 1), "Paper " + std::to_string(i + 1), {}, {}, i));
    return out;
}

std::string debate_reply(double p) {
    return "FOR:\n- relevant method\n- same task\nAGAINST:\n- older data\nPROBABILITY: " + std::to_string(p);
}

}  // namespace

TEST_CASE("permutation prompt lists each candidate once") {
    auto papers = candidates(4);
    papers[2].abstract = std::string(5000, 'a');
    papers[3].abstract.reset();
    auto prompt = build_permutation_prompt("Our abstract.", papers);
    for (int i = 1; i <= 4; ++i) {
        auto marker = "[" + std::to_string(i) + "]";
        auto first = prompt.find(marker);
        REQUIRE(first != std::string::npos);
        CHECK(prompt.find(marker, first + 1) == std::string::npos);
    }
    CHECK(prompt.find("Paper 1 — Abstract of Paper 1.") != std::string::npos);
    CHECK(prompt.find(std::string(1200, 'a')) != std::string::npos);
    CHECK(prompt.find(std::string(1201, 'a')) == std::string::npos);
    CHECK(prompt.find("Our abstract.") != std::string::npos);

    CHECK(capture_error([&] { build_permutation_prompt("x", candidates(11)); }).code() == ErrorCode::TooManyCandidates);
    CHECK(capture_error([&] { build_permutation_prompt(" ", papers); }).code() == ErrorCode::EmptyAbstract);
    RerankOptions wide;
    wide.max_rerank = 20;
    CHECK_NOTHROW(build_permutation_prompt("x", candidates(11), wide));
}

TEST_CASE("parse_permutation examples") {
    auto a = parse_permutation("[2] > [1] > [3]", 3);
    CHECK(a.order == std::vector<std::size_t>{2, 1, 3});
    CHECK(a.repairs_applied.empty());
    auto b = parse_permutation("I think: [3] > [1]", 3);
    CHECK(b.order == std::vector<std::size_t>{3, 1, 2});
    CHECK(b.repairs_applied == std::vector<std::string>{"R3"});
    auto c = parse_permutation("[1] > [1] > [5]", 3);
    CHECK(c.order == std::vector<std::size_t>{1, 2, 3});
    CHECK(std::set<std::string>(c.repairs_applied.begin(), c.repairs_applied.end()) ==
          std::set<std::string>{"R1", "R2", "R3"});
    CHECK(capture_error([] { parse_permutation("no markers", 3); }).code() == ErrorCode::Unparseable);
}

TEST_CASE("handcrafted malformed outputs") {
    auto corpus = nlohmann::json::parse(testsupport::slurp(testsupport::fixtures_dir() / "rerank" / "malformed_permutations.json"));
    REQUIRE(corpus.size() >= 30);
    for (const auto& entry : corpus) {
        auto text = entry["text"].get<std::string>();
        auto n = entry["n"].get<std::size_t>();
        INFO(text);
        if (entry.value("unparseable", false)) {
            CHECK(capture_error([&] { parse_permutation(text, n); }).code() == ErrorCode::Unparseable);
            continue;
        }
        auto ranked = parse_permutation(text, n);
        CHECK(ranked.order == entry["order"].get<std::vector<std::size_t>>());
        auto expected = entry["repairs"].get<std::set<std::string>>();
        CHECK(std::set<std::string>(ranked.repairs_applied.begin(), ranked.repairs_applied.end()) == expected);
        CHECK(ranked.is_permutation());
    }
}

TEST_CASE("random marker soups parse to permutations or fail cleanly") {
    std::mt19937 rng(1000);
    std::size_t parsed = 0;
    for (int round = 0; round < 5000; ++round) {
        std::size_t n = 1 + rng() % 12;
        auto soup = marker_soup(rng);
        INFO(soup << " n=" << n);
        try {
            auto ranked = parse_permutation(soup, n);
            REQUIRE(is_permutation_of(ranked.order, n));
            REQUIRE(ranked.is_permutation());
            ++parsed;
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::Unparseable);
            for (auto idx : cited_indices(soup)) REQUIRE((idx < 1 || idx > n));
        }
    }
    CHECK(parsed > 2500);
}

TEST_CASE("rerank_by_permutation composes and falls back") {
    auto scripted = std::make_shared<ScriptedLlmBackend>(std::vector<std::string>{"[2] > [3] > [1]"});
    auto gw = gateway_for(scripted);
    auto ranked = rerank_by_permutation(gw, "abstract", candidates(3));
    CHECK(ranked.order == std::vector<std::size_t>{2, 3, 1});
    CHECK_FALSE(ranked.fallback);
    REQUIRE(scripted->requests().size() == 1);
    CHECK(scripted->requests()[0].template_id == "rerank_permutation_v1");
    CHECK(scripted->requests()[0].temperature == 0.0);

    auto garbage = gateway_for(std::make_shared<ScriptedLlmBackend>(std::vector<std::string>{"no idea"}));
    auto fallback = rerank_by_permutation(garbage, "abstract", candidates(3));
    CHECK(fallback.order == std::vector<std::size_t>{1, 2, 3});
    CHECK(fallback.fallback);
    CHECK(std::count(fallback.repairs_applied.begin(), fallback.repairs_applied.end(), "fallback:source-order") == 1);

    RerankOptions reprompt;
    reprompt.reprompt_on_unparseable = true;
    auto twice = std::make_shared<ScriptedLlmBackend>(std::vector<std::string>{"no idea", "[3] > [1] > [2]"});
    auto retry_gw = gateway_for(twice);
    CHECK(rerank_by_permutation(retry_gw, "abstract", candidates(3), reprompt).order ==
          std::vector<std::size_t>{3, 1, 2});
    CHECK(retry_gw.audit()->size() == 2);
}

TEST_CASE("worked example ranking replays the recorded permutation") {
    auto store = std::make_shared<CassetteStore>(testsupport::table1_cassettes());
    SemanticScholarClient s2(std::make_shared<ReplayTransport>(store), {});
    auto papers = merge_and_dedup({s2.search("Multimodal Research: Image-Text Model Interaction", 4).records});
    auto abstract = testsupport::slurp(testsupport::table1_source() / "abstract.txt");
    for (int run = 0; run < 2; ++run) {
        auto gw = gateway_for(std::make_shared<ReplayLlmBackend>(store));
        auto ranked = rerank_by_permutation(gw, abstract, papers);
        CHECK(ranked.order == std::vector<std::size_t>{1, 2, 3, 4});
        CHECK(ranked.repairs_applied.empty());
        CHECK_FALSE(ranked.fallback);
    }
}

TEST_CASE("apply_ranking and source order") {
    auto papers = candidates(3);
    RankedList ranked;
    ranked.n = 3;
    ranked.order = {3, 1, 2};
    auto reordered = apply_ranking(papers, ranked);
    CHECK(reordered[0].canonical_id == "S2:3");
    CHECK(reordered[2].canonical_id == "S2:2");
    CHECK(source_order(3).order == std::vector<std::size_t>{1, 2, 3});
    CHECK(source_order(3).method == RankMethod::SourceOrder);
    ranked.order = {1, 1, 2};
    CHECK(capture_error([&] { apply_ranking(papers, ranked); }).code() == ErrorCode::InvalidArgument);
}

TEST_CASE("debate parsing") {
    auto v = parse_debate("FOR:\n- strong overlap\n* same dataset\nAGAINST:\n- different modality\nPROBABILITY: 0.85", 2);
    CHECK(v.include_probability == Catch::Approx(0.85));
    CHECK(v.candidate_index == 2);
    CHECK(v.arguments_for == std::vector<std::string>{"strong overlap", "same dataset"});
    CHECK(v.arguments_against == std::vector<std::string>{"different modality"});
    CHECK(v.repairs.empty());

    auto clamped = parse_debate("FOR: yes\nPROBABILITY: 1.7", 1);
    CHECK(clamped.include_probability == 1.0);
    CHECK(clamped.repairs == std::vector<std::string>{"clamped"});
    CHECK(clamped.arguments_for == std::vector<std::string>{"yes"});
    CHECK(parse_debate("probability: -0.2", 1).include_probability == 0.0);
    CHECK(parse_debate("PROBABILITY: 0.2\nPROBABILITY: 0.6", 1).include_probability == Catch::Approx(0.6));
    CHECK(parse_debate("Probability = 40%", 1).include_probability == Catch::Approx(0.4));

    CHECK(capture_error([] { parse_debate("FOR:\n- a\nAGAINST:\n- b", 1); }).code() == ErrorCode::Unparseable);
}

TEST_CASE("aggregate examples") {
    CHECK(aggregate_debate({verdict(1, 0.9), verdict(2, 0.4), verdict(3, 0.7)}).order ==
          std::vector<std::size_t>{1, 3, 2});
    CHECK(aggregate_debate({verdict(1, 0.5), verdict(2, 0.5)}).order == std::vector<std::size_t>{1, 2});
    CHECK(aggregate_debate({verdict(2, 0.5), verdict(1, 0.5)}).order == std::vector<std::size_t>{1, 2});
    CHECK(capture_error([] { aggregate_debate({verdict(1, 0.5), verdict(1, 0.4)}); }).code() ==
          ErrorCode::IncompleteVerdictSet);
    CHECK(capture_error([] { aggregate_debate({verdict(1, 0.5), verdict(3, 0.4)}); }).code() ==
          ErrorCode::IncompleteVerdictSet);
    CHECK(capture_error([] { aggregate_debate({}); }).code() == ErrorCode::IncompleteVerdictSet);
}

TEST_CASE("aggregate matches the comparison oracle") {
    std::mt19937 rng(500);
    const std::vector<double> grid{0.0, 0.25, 0.5, 0.5, 0.75, 1.0};
    for (std::size_t n = 1; n <= 8; ++n) {
        for (int round = 0; round < 500; ++round) {
            std::vector<DebateVerdict> verdicts;
            bool coarse = round % 2 == 0;  // coarse vectors are full of ties
            for (std::size_t i = 1; i <= n; ++i) {
                double p = coarse ? grid[rng() % grid.size()] : std::uniform_real_distribution<double>(0, 1)(rng);
                verdicts.push_back(verdict(i, p));
            }
            std::shuffle(verdicts.begin(), verdicts.end(), rng);
            auto ranked = aggregate_debate(verdicts);
            REQUIRE(ranked.order == oracle_order(verdicts));
            REQUIRE(ranked.method == RankMethod::Debate);
        }
    }
}

TEST_CASE("debate reranking respects the concurrency cap and records in order") {
    std::atomic<int> in_flight{0}, peak{0};
    auto backend = std::make_shared<LambdaLlm>([&](const LlmRequest& req) {
        int now = ++in_flight;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        --in_flight;
        // probability rises with the candidate number
        for (int i = 9; i >= 1; --i)
            if (req.user_text.find("Paper " + std::to_string(i)) != std::string::npos) return debate_reply(i / 10.0);
        return debate_reply(0.0);
    });
    auto gw = gateway_for(backend);
    RerankOptions options;
    options.debate_concurrency = 3;
    std::vector<DebateVerdict> verdicts;
    auto ranked = rerank_by_debate(gw, "abstract", candidates(8), options, &verdicts);
    CHECK(ranked.order == std::vector<std::size_t>{8, 7, 6, 5, 4, 3, 2, 1});
    CHECK(peak.load() <= 3);
    CHECK(peak.load() >= 2);
    REQUIRE(verdicts.size() == 8);
    CHECK(verdicts[0].arguments_for.size() == 2);

    auto log = gw.audit()->snapshot();
    REQUIRE(log.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(log[i].id == "ex-000" + std::to_string(i + 1));
        CHECK(log[i].request.user_text.find("Paper " + std::to_string(i + 1)) != std::string::npos);
        CHECK(log[i].request.template_id == "debate_v1");
    }
}

TEST_CASE("debate errors propagate") {
    auto gw = gateway_for(std::make_shared<LambdaLlm>([](const LlmRequest&) { return std::string("no verdict"); }));
    CHECK(capture_error([&] { rerank_by_debate(gw, "abstract", candidates(2)); }).code() == ErrorCode::Unparseable);
    auto papers = candidates(2);
    papers[1].abstract.reset();
    auto ok = gateway_for(std::make_shared<LambdaLlm>([](const LlmRequest&) { return debate_reply(0.5); }));
    CHECK(rerank_by_debate(ok, "abstract", papers).order == std::vector<std::size_t>{1, 2});
    CHECK(debate_candidate(ok, "abstract", papers[0], 1).include_probability == Catch::Approx(0.5));
    CHECK(capture_error([&] { rerank_by_debate(ok, "", papers); }).code() == ErrorCode::EmptyAbstract);
}

TEST_CASE("rank method names") {
    CHECK(rank_method_from_string("debate") == RankMethod::Debate);
    CHECK(rank_method_from_string("permutation") == RankMethod::Permutation);
    CHECK(to_string(RankMethod::SourceOrder) == "source_order");
    CHECK(capture_error([] { rank_method_from_string("pairwise"); }).code() == ErrorCode::InvalidArgument);
}
