// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fail.
//
//   acceptance <fixtures-dir> <unit-test-list>

#include "litpipe/cli.hpp"
#include "litpipe/pipeline.hpp"
#include "oracles.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace litpipe;
using namespace oracles;

namespace {

constexpr double kTable1Seconds = 5.0;
constexpr double kPermutationSeconds = 10.0;
constexpr double kSuiteSeconds = 60.0;
constexpr int kSoups = 2000;
constexpr std::size_t kMinHandcrafted = 30;
constexpr int kDebateVectors = 500;
constexpr std::size_t kDebateMaxSize = 8;
constexpr int kCorpusRounds = 500;
constexpr int kPlanRoundTrips = 200;
constexpr int kHallucinationDrafts = 1000;

fs::path g_fixtures;
fs::path g_unit_list;

/// Thrown by require(); carries the first broken expectation.
struct Broken {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Broken{what};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt_seconds(double s) {
    std::ostringstream out;
    out.precision(3);
    out << std::fixed << s << " s";
    return out.str();
}

template <typename F>
ErrorCode error_of(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw Broken{"expected an error"};
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (auto x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
    return out;
}

// ---------------------------------------------------------------------------

std::string table1_replay() {
    const auto src = g_fixtures / "table1" / "source";
    const auto cassettes = g_fixtures / "table1" / "cassettes";
    auto tmp = fs::temp_directory_path() / ("litpipe-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    auto session_file = tmp / "s.json";

    auto start = std::chrono::steady_clock::now();
    std::ostringstream out, err;
    int code = cli::run({"run", "--abstract-file", (src / "abstract.txt").string(), "--replay", cassettes.string(),
                         "--plan", slurp(src / "plan.txt"), "--out", session_file.string()},
                        out, err);
    double elapsed = seconds_since(start);
    require(code == 0, "cli run exited " + std::to_string(code) + ": " + err.str());

    auto session = read_session_file(session_file);
    fs::remove_all(tmp);
    require(session.query_spec.synthesized_query == std::string("Multimodal Research: Image-Text Model Interaction"),
            "query differs");
    const std::vector<std::string> titles{
        "CoCa: Contrastive Captioners are Image-Text Foundation Models",
        "MAMO: Fine-Grained Vision-Language Representations Learning with Masked Multimodal Modeling",
        "Dynamic Modality Interaction Modeling for Image-Text Retrieval",
        "WIT: Wikipedia-based Image Text Dataset for Multimodal Multilingual Machine Learning"};
    auto context = context_order(session);
    require(context.size() == titles.size(), "expected 4 papers, got " + std::to_string(context.size()));
    for (std::size_t i = 0; i < titles.size(); ++i) require(context[i].title == titles[i], "title [" + std::to_string(i + 1) + "] differs");
    require(session.drafts.size() == 2, "expected two drafts");
    require(session.drafts[0].text == slurp(src / "zero_shot.txt"), "zero-shot draft differs");
    require(session.drafts[1].text == slurp(src / "plan_draft.txt"), "plan draft differs");
    require(elapsed < kTable1Seconds, "took " + fmt_seconds(elapsed));
    return fmt_seconds(elapsed);
}

std::string permutation_robustness() {
    auto start = std::chrono::steady_clock::now();
    std::mt19937 rng(1);
    int parsed = 0;
    for (int round = 0; round < kSoups; ++round) {
        std::size_t n = 1 + rng() % 12;
        auto soup = marker_soup(rng);
        try {
            auto ranked = parse_permutation(soup, n);
            require(is_permutation_of(ranked.order, n), "not a permutation: '" + soup + "'");
            ++parsed;
        } catch (const Error& e) {
            require(e.code() == ErrorCode::Unparseable, "unexpected error on '" + soup + "'");
            for (auto idx : cited_indices(soup)) require(idx < 1 || idx > n, "in-range marker rejected: '" + soup + "'");
        }
    }

    auto corpus = json::parse(slurp(g_fixtures / "rerank" / "malformed_permutations.json"));
    require(corpus.size() >= kMinHandcrafted, "only " + std::to_string(corpus.size()) + " handcrafted outputs");
    std::set<std::string> repairs_seen;
    for (const auto& entry : corpus) {
        auto text = entry["text"].get<std::string>();
        auto n = entry["n"].get<std::size_t>();
        if (entry.value("unparseable", false)) {
            require(error_of([&] { parse_permutation(text, n); }) == ErrorCode::Unparseable, "should be unparseable: " + text);
            continue;
        }
        auto ranked = parse_permutation(text, n);
        require(is_permutation_of(ranked.order, n), "not a permutation: " + text);
        require(ranked.order == entry["order"].get<std::vector<std::size_t>>(), "order differs: " + text);
        auto expected = entry["repairs"].get<std::set<std::string>>();
        require(std::set<std::string>(ranked.repairs_applied.begin(), ranked.repairs_applied.end()) == expected,
                "repairs differ: " + text);
        repairs_seen.insert(ranked.repairs_applied.begin(), ranked.repairs_applied.end());
    }
    require(repairs_seen == std::set<std::string>{"R1", "R2", "R3"}, "fixture corpus does not exercise R1-R3");
    double elapsed = seconds_since(start);
    require(elapsed < kPermutationSeconds, "took " + fmt_seconds(elapsed));
    return std::to_string(kSoups) + " soups (" + std::to_string(parsed) + " parsed), " + std::to_string(corpus.size()) +
           " handcrafted, " + fmt_seconds(elapsed);
}

std::string debate_oracle() {
    std::mt19937 rng(500);
    const std::vector<double> grid{0.0, 0.25, 0.5, 0.5, 0.75, 1.0};
    int with_ties = 0;
    for (std::size_t n = 1; n <= kDebateMaxSize; ++n) {
        for (int round = 0; round < kDebateVectors; ++round) {
            std::vector<DebateVerdict> verdicts;
            bool coarse = round % 2 == 0;
            std::set<double> distinct;
            for (std::size_t i = 1; i <= n; ++i) {
                double p = coarse ? grid[rng() % grid.size()] : std::uniform_real_distribution<double>(0, 1)(rng);
                verdicts.push_back(verdict(i, p));
                distinct.insert(p);
            }
            if (distinct.size() < n) ++with_ties;
            std::shuffle(verdicts.begin(), verdicts.end(), rng);
            auto got = aggregate_debate(verdicts).order;
            auto want = oracle_order(verdicts);
            require(got == want, "n=" + std::to_string(n) + ": " + join(got) + " vs " + join(want));
        }
    }
    require(with_ties > 0, "no tied vectors generated");
    return std::to_string(kDebateVectors * kDebateMaxSize) + " vectors, " + std::to_string(with_ties) + " with ties";
}

std::vector<std::string> ids_of(const std::vector<PaperRecord>& papers) {
    std::vector<std::string> out;
    for (const auto& p : papers) out.push_back(p.canonical_id);
    return out;
}

std::string corpus_laws() {
    std::mt19937 rng(20231002);
    for (int round = 0; round < kCorpusRounds; ++round) {
        auto batches = random_batches(rng);
        std::size_t total = 0;
        for (const auto& b : batches) total += b.size();
        require(total <= 20, "batch generator exceeded 20 records");

        auto merged = merge_and_dedup(batches);
        auto expected = oracle_merge(batches);
        require(merged.size() == expected.size(), "group count differs from oracle");
        for (std::size_t i = 0; i < merged.size(); ++i) {
            require(merged[i].canonical_id == expected[i].canonical_id && merged[i].sources == expected[i].sources &&
                        merged[i].best_source_position == expected[i].best_position,
                    "merge differs from oracle in round " + std::to_string(round));
        }
        require(merge_and_dedup(merged) == merged, "merge not idempotent in round " + std::to_string(round));

        auto reversed = batches;
        std::reverse(reversed.begin(), reversed.end());
        std::multiset<std::set<Source>> sa, sb;
        for (const auto& p : merged) sa.insert(p.sources);
        for (const auto& p : merge_and_dedup(reversed)) sb.insert(p.sources);
        require(sa == sb, "merge depends on batch order in round " + std::to_string(round));

        std::vector<PaperRecord> papers = merged;
        std::shuffle(papers.begin(), papers.end(), rng);
        auto sorted = sort_papers(papers, SortKey::CitationCount);
        auto reference = insertion_sort(papers, [](const PaperRecord& x, const PaperRecord& y) {
            return desc_absent_last(x.citation_count, y.citation_count);
        });
        require(sorted == reference, "citation sort not stable in round " + std::to_string(round));
        auto by_year = sort_papers(papers, SortKey::Year);
        require(by_year == insertion_sort(papers, [](const PaperRecord& x, const PaperRecord& y) {
                    return desc_absent_last(x.year, y.year);
                }),
                "year sort not stable in round " + std::to_string(round));
        auto before = ids_of(papers), after = ids_of(sorted);
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        require(before == after, "sort changed the multiset");
    }

    auto store = std::make_shared<CassetteStore>(g_fixtures / "table1" / "cassettes");
    PipelineServices services;
    services.s2_transport = std::make_shared<ReplayTransport>(store);
    services.openalex_transport = services.s2_transport;
    services.llm = std::make_shared<ReplayLlmBackend>(store);
    services.new_session_id = [] { return std::string("acceptance"); };
    services.now = [] { return std::string("2023-10-02T09:00:00Z"); };
    QuerySpec spec;
    spec.abstract_text = slurp(g_fixtures / "table1" / "source" / "abstract.txt");
    auto config = merge_config(PipelineConfig{}, json::parse(slurp(g_fixtures / "table1" / "cassettes" / "config.json")));
    auto session = Pipeline(services).run_pipeline(spec, config);
    std::vector<std::size_t> markers;
    for (const auto& view : candidate_view(session, SortKey::CitationCount)) markers.push_back(view.marker);
    require(markers == std::vector<std::size_t>{1, 4, 3, 2}, "worked example citation order is " + join(markers));
    return std::to_string(kCorpusRounds) + " random batch sets; citation order [1],[4],[3],[2]";
}

std::string plan_grammar() {
    std::mt19937 rng(200);
    for (int round = 0; round < kPlanRoundTrips; ++round) {
        auto plan = random_plan(rng);
        auto text = render_plan(plan);
        require(parse_plan(text) == plan, "round trip failed: " + text);
    }
    const std::string table1 =
        "Generate the output using 5 sentences. Cite [1] on line 2. Cite [2], [3] on line 3. Cite [4] on line 5.";
    require(parse_plan(table1) == SentencePlan{5, std::nullopt, {{2, {1}}, {3, {2, 3}}, {5, {4}}}},
            "worked example plan parsed differently");
    require(error_of([] { parse_plan("Please generate five sentences."); }) == ErrorCode::SyntaxError,
            "syntax error not raised");
    require(error_of([] { parse_plan("Please generate 5 sentences. Cite [2] at line 9."); }) ==
                ErrorCode::PlanLineOutOfRange,
            "out-of-range line not raised");
    require(error_of([] { parse_plan("Please generate 5 sentences. Cite [2] at line 1. Cite [2] at line 1."); }) ==
                ErrorCode::DuplicateDirective,
            "duplicate directive not raised");
    return std::to_string(kPlanRoundTrips) + " round trips, 3 error classes";
}

std::string compliance() {
    const SentencePlan plan{5, std::nullopt, {{2, {1}}, {3, {2, 3}}, {5, {4}}}};
    const std::string good =
        "Multimodal models are popular. CoCa [1] unifies captioning and contrast. MAMO [2] and routing [3] refine "
        "interaction. Data scale matters. WIT [4] provides multilingual pairs.";
    auto ok = validate_compliance(good, plan, 4);
    require(ok.fully_compliant && ok.sentence_count_ok && ok.unknown_citations.empty(), "compliant draft rejected");
    for (const auto& d : ok.per_directive) require(d.satisfied, "directive unsatisfied on compliant draft");

    auto extra = validate_compliance(good + " One more sentence.", plan, 4);
    require(!extra.sentence_count_ok && extra.sentence_count_observed == 6 && !extra.fully_compliant,
            "sentence count not checked");
    const std::string misplaced =
        "Multimodal models [1] are popular. CoCa unifies captioning and contrast. MAMO [2] and routing [3] refine "
        "interaction. Data scale matters. WIT [4] provides multilingual pairs.";
    auto moved = validate_compliance(misplaced, plan, 4);
    require(!moved.per_directive[0].satisfied && moved.per_directive[1].satisfied && !moved.fully_compliant,
            "placement not checked");
    auto unknown = validate_compliance(good + " Also [7].", plan, 4);
    require(unknown.unknown_citations == std::vector<std::uint64_t>{7} && !unknown.fully_compliant,
            "unknown citation not flagged");

    std::mt19937 rng(7);
    const std::vector<std::string> words{"The", "model", "[1]", "[4]", "works.", "Data", "[2],", "helps.", "We"};
    for (int round = 0; round < kHallucinationDrafts; ++round) {
        std::vector<std::string> tokens;
        for (int i = static_cast<int>(rng() % 20); i > 0; --i) tokens.push_back(words[rng() % words.size()]);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng() % (tokens.size() + 1)), "[7]");
        std::string draft;
        for (const auto& t : tokens) draft += t + " ";
        auto report = validate_compliance(draft, random_plan(rng), 4);
        require(std::count(report.unknown_citations.begin(), report.unknown_citations.end(), 7u) == 1 &&
                    !report.fully_compliant,
                "[7] not flagged in: " + draft);
    }
    return "positive and negative cases; [7] flagged in " + std::to_string(kHallucinationDrafts) + " drafts";
}

std::string api_contract() {
    struct Seen {
        std::string method, path, target, body, api_key, content_type;
        httplib::Params params;
    };
    std::vector<Seen> seen;
    std::mutex m;
    httplib::Server server;
    auto handler = [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(m);
            seen.push_back({req.method, req.path, req.target, req.body, req.get_header_value("X-API-KEY"),
                            req.get_header_value("Content-Type"), req.params});
        }
        if (req.path.rfind("/recommendations/", 0) == 0) res.set_content(R"({"recommendedPapers":[]})", "application/json");
        else res.set_content(R"({"total":0,"data":[]})", "application/json");
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ApiCredentials creds;
    creds.s2_api_key = "acceptance-key";
    SemanticScholarClient client(std::make_shared<LiveTransport>(std::chrono::seconds(5)), creds,
                                 "http://127.0.0.1:" + std::to_string(port));
    std::string failure;
    try {
        client.search("Multimodal Research: Image-Text Model Interaction", 4, {"title", "abstract"});
        client.recommend("2205.01917", 10, {"title", "url"});
    } catch (const std::exception& e) {
        failure = e.what();
    }
    server.stop();
    thread.join();
    require(failure.empty(), failure);
    require(seen.size() == 2, "expected two requests");

    const auto& search = seen[0];
    require(search.method == "GET" && search.path == "/graph/v1/paper/search", "search path");
    require(search.target ==
                "/graph/v1/paper/search?query=Multimodal+Research%3A+Image-Text+Model+Interaction&limit=4&fields=title%2Cabstract",
            "search target: " + search.target);
    require(search.params.find("query")->second == "Multimodal Research: Image-Text Model Interaction" &&
                search.params.find("limit")->second == "4" && search.params.find("fields")->second == "title,abstract",
            "search params");
    require(search.api_key == "acceptance-key", "X-API-KEY missing on search");

    const auto& rec = seen[1];
    require(rec.method == "POST" && rec.path == "/recommendations/v1/papers/", "recommend path");
    require(rec.target == "/recommendations/v1/papers/?fields=title%2Curl&limit=10", "recommend target: " + rec.target);
    require(rec.body == R"({"positivePaperIds": ["ArXiv:2205.01917"]})", "recommend body: " + rec.body);
    require(rec.content_type == "application/json", "recommend content type");
    require(rec.api_key == "acceptance-key", "X-API-KEY missing on recommend");
    return "search and recommend requests match";
}

std::string offline_suite() {
    std::ifstream list(g_unit_list);
    require(static_cast<bool>(list), "cannot read " + g_unit_list.string());
    std::vector<std::string> binaries;
    for (std::string line; std::getline(list, line);)
        if (!line.empty()) binaries.push_back(line);
    require(!binaries.empty(), "no unit test binaries listed");

    auto start = std::chrono::steady_clock::now();
    for (const auto& bin : binaries) {
        int rc = std::system(("\"" + bin + "\" > /dev/null 2>&1").c_str());
        require(rc == 0, fs::path(bin).filename().string() + " failed");
    }
    double elapsed = seconds_since(start);
    require(elapsed < kSuiteSeconds, "took " + fmt_seconds(elapsed));
    return std::to_string(binaries.size()) + " binaries in " + fmt_seconds(elapsed);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: acceptance <fixtures-dir> <unit-test-list>\n";
        return 2;
    }
    g_fixtures = argv[1];
    g_unit_list = argv[2];
    spdlog::set_level(spdlog::level::off);

    const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
        {"table1-replay", table1_replay},
        {"permutation-robustness", permutation_robustness},
        {"debate-aggregation-oracle", debate_oracle},
        {"corpus-laws", corpus_laws},
        {"plan-grammar", plan_grammar},
        {"compliance-validator", compliance},
        {"api-client-contract", api_contract},
        {"offline-suite-time", offline_suite},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        std::string detail;
        bool ok = false;
        try {
            detail = check();
            ok = true;
        } catch (const Broken& b) {
            detail = b.what;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        failures += ok ? 0 : 1;
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
