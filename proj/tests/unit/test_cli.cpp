#include "litpipe/cli.hpp"

#include "test_support.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <sstream>

using namespace litpipe;
using nlohmann::json;
using testsupport::slurp;
using testsupport::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string source(const std::string& name) { return (testsupport::table1_source() / name).string(); }

json paper(const std::string& id, const std::string& title, int cites) {
    return json{{"paperId", id}, {"title", title}, {"abstract", "About " + title + "."}, {"year", 2020},
                {"citationCount", cites}};
}

/// Plays S2, OpenAlex and an OpenAI-compatible chat endpoint.
void fake_upstreams(const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/graph/v1/paper/search") {
        json data = json::array({paper("a1", "Graph rewriting for compilers", 40), paper("b2", "Term rewriting", 90)});
        res.set_content(json{{"total", 2}, {"data", data}}.dump(), "application/json");
    } else if (req.path.rfind("/recommendations/", 0) == 0) {
        res.set_content(json{{"recommendedPapers", json::array({paper("c3", "Seeded neighbour", 5)})}}.dump(),
                        "application/json");
    } else if (req.path == "/works") {
        res.set_content(R"({"meta":{"count":0},"results":[]})", "application/json");
    } else if (req.path == "/v1/chat/completions") {
        auto prompt = json::parse(req.body)["messages"].back()["content"].get<std::string>();
        std::string reply = "Uses [1] and [2].";
        if (prompt.find("Summarize the research idea") != std::string::npos) reply = "graph rewriting";
        if (prompt.find("candidate papers, each indicated") != std::string::npos) reply = "[2] > [1]";
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}}.dump(),
                        "application/json");
    } else {
        res.status = 404;
    }
}

std::vector<std::string> stub_flags(const testsupport::StubServer& stub) {
    return {"--s2-base", stub.base_url(), "--openalex-base", stub.base_url(), "--llm-base", stub.base_url()};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("run replays the worked example") {
    TempDir dir;
    auto out_file = (dir / "s.json").string();
    auto started = std::chrono::steady_clock::now();
    auto r = run_cli({"run", "--abstract-file", source("abstract.txt"), "--replay",
                      testsupport::table1_cassettes().string(), "--plan", slurp(source("plan.txt")), "--out", out_file});
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(elapsed < 5.0);
    CHECK(r.out.find("query: Multimodal Research: Image-Text Model Interaction") != std::string::npos);
    CHECK(r.out.find("[4] WIT: Wikipedia-based Image Text Dataset") != std::string::npos);
    CHECK(r.out.find("line 2 ok, line 3 ok, line 5 ok") != std::string::npos);

    auto session = read_session_file(out_file);
    CHECK(*session.query_spec.synthesized_query == "Multimodal Research: Image-Text Model Interaction");
    REQUIRE(session.drafts.size() == 2);
    CHECK(session.drafts[0].text == slurp(source("zero_shot.txt")));
    CHECK(session.drafts[1].text == slurp(source("plan_draft.txt")));

    auto gen = run_cli({"generate", "--session", out_file, "--replay", testsupport::table1_cassettes().string(),
                        "--plan", "Please generate 2 sentences. Cite [1] at line 1."});
    INFO(gen.err);
    REQUIRE(gen.code == 0);
    auto regenerated = read_session_file(out_file);
    REQUIRE(regenerated.drafts.size() == 3);
    CHECK(regenerated.drafts[2].text == slurp(source("short_plan_draft.txt")));
    CHECK(regenerated.drafts[0] == session.drafts[0]);
    CHECK(regenerated.drafts[1] == session.drafts[1]);
}

TEST_CASE("--json emits exactly one document") {
    auto r = run_cli({"run", "--json", "--abstract-file", source("abstract.txt"), "--replay",
                      testsupport::table1_cassettes().string()});
    REQUIRE(r.code == 0);
    json doc;
    REQUIRE_NOTHROW(doc = json::parse(r.out));
    CHECK(doc["query_spec"]["synthesized_query"] == "Multimodal Research: Image-Text Model Interaction");
    CHECK(doc["candidates"].size() == 4);
    CHECK(r.out.find("[info]") == std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
    auto none = run_cli({"run"});
    CHECK(none.code == 1);
    CHECK(none.err.find("--abstract-file") != std::string::npos);
    CHECK(none.out.empty());

    CHECK(run_cli({"run", "--abstract-file", "a.txt", "--frobnicate"}).code == 1);
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"teleport"}).code == 1);
    CHECK(run_cli({"generate"}).code == 1);
    CHECK(run_cli({"run", "--abstract-file", "/nonexistent/abstract.txt"}).code == 1);
    CHECK(run_cli({"run", "--keywords", "x", "--replay", "/nonexistent/dir"}).code == 1);
    CHECK(run_cli({"run", "--keywords", "x", "--replay", testsupport::table1_cassettes().string(), "--top-k", "0"})
              .code == 1);
    CHECK(run_cli({"run", "--keywords", "x", "--replay", testsupport::table1_cassettes().string(), "--plan",
                   "Please generate two sentences."})
              .code == 1);

    auto help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("run") != std::string::npos);
}

TEST_CASE("a cassette miss is an upstream failure") {
    auto r = run_cli({"run", "--keywords", "never recorded", "--replay", testsupport::table1_cassettes().string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("CassetteMiss") != std::string::npos);
    CHECK(r.err.find("stage retrieval") != std::string::npos);
}

TEST_CASE("search and rerank against live endpoints") {
    testsupport::StubServer stub(fake_upstreams);
    TempDir dir;
    auto candidates = (dir / "candidates.json").string();
    auto search = run_cli(concat({"search", "--query", "graph rewriting", "--sources", "s2", "--out", candidates},
                                 stub_flags(stub)));
    INFO(search.err);
    REQUIRE(search.code == 0);
    CHECK(search.out.find("query: graph rewriting") != std::string::npos);
    CHECK(search.out.find("[1] Graph rewriting for compilers (2020), 40 citations") != std::string::npos);
    auto doc = json::parse(slurp(candidates));
    CHECK(doc["candidates"].size() == 2);
    auto target = stub.requests().at(0).raw_target;
    CHECK(target.find("query=graph+rewriting") != std::string::npos);
    CHECK(target.find("limit=20") != std::string::npos);

    auto rerank = run_cli(concat({"rerank", "--candidates", candidates, "--json"}, stub_flags(stub)));
    INFO(rerank.err);
    REQUIRE(rerank.code == 0);
    auto ranked = json::parse(rerank.out);
    CHECK(ranked["ranked"]["order"] == json::array({2, 1}));
    CHECK(ranked["candidates"][0]["title"] == "Term rewriting");
    CHECK(ranked["audit"].size() == 1);

    auto seeded = run_cli(concat({"search", "--seed", "2205.01917", "--sources", "s2"}, stub_flags(stub)));
    REQUIRE(seeded.code == 0);
    CHECK(seeded.out.find("Seeded neighbour") != std::string::npos);
    CHECK(stub.requests().back().body == R"({"positivePaperIds": ["ArXiv:2205.01917"]})");

    CHECK(run_cli(concat({"rerank", "--candidates", candidates}, stub_flags(stub))).code == 0);
    auto no_topic = json{{"candidates", doc["candidates"]}};
    testsupport::spit(dir / "bare.json", no_topic.dump());
    CHECK(run_cli(concat({"rerank", "--candidates", (dir / "bare.json").string()}, stub_flags(stub))).code == 1);
}

TEST_CASE("record writes cassettes that replay offline") {
    testsupport::StubServer stub(fake_upstreams);
    TempDir dir;
    auto cassettes = (dir / "cassettes").string();
    testsupport::spit(dir / "abstract.txt", "We study rewriting systems for optimizing compilers.");
    ::setenv("LITPIPE_S2_API_KEY", "secret-s2-key", 1);
    ::setenv("LITPIPE_LLM_API_KEY", "secret-llm-key", 1);
    auto recorded = run_cli(concat({"record", "--abstract-file", (dir / "abstract.txt").string(), "--cassettes",
                                    cassettes, "--sources", "s2", "--plan", "Please generate 1 sentences. Cite [1] at line 1."},
                                   stub_flags(stub)));
    ::unsetenv("LITPIPE_S2_API_KEY");
    ::unsetenv("LITPIPE_LLM_API_KEY");
    INFO(recorded.err);
    REQUIRE(recorded.code == 0);
    CHECK(stub.requests().at(1).headers.find("X-API-KEY")->second == "secret-s2-key");

    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(cassettes)) {
        ++files;
        auto content = slurp(entry.path());
        CHECK(content.find("secret-") == std::string::npos);
        CHECK(content.find("Authorization") == std::string::npos);
    }
    CHECK(files == 5);  // summarize, search, rerank, zero-shot, plan

    auto replayed = run_cli({"run", "--abstract-file", (dir / "abstract.txt").string(), "--replay", cassettes,
                             "--sources", "s2", "--plan", "Please generate 1 sentences. Cite [1] at line 1."});
    INFO(replayed.err);
    REQUIRE(replayed.code == 0);
    auto strip_session = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
    CHECK(strip_session(replayed.out) == strip_session(recorded.out));
    CHECK(replayed.out.find("[1] Term rewriting") != std::string::npos);
}

TEST_CASE("exit codes") {
    CHECK(cli::exit_code_for(ErrorCode::InvalidArgument) == 1);
    CHECK(cli::exit_code_for(ErrorCode::SyntaxError) == 1);
    CHECK(cli::exit_code_for(ErrorCode::PlanContextMismatch) == 1);
    CHECK(cli::exit_code_for(ErrorCode::RateLimited) == 2);
    CHECK(cli::exit_code_for(ErrorCode::UpstreamError) == 2);
    CHECK(cli::exit_code_for(ErrorCode::LlmFailure) == 2);
    CHECK(cli::exit_code_for(ErrorCode::NoCandidatesFound) == 2);
}
