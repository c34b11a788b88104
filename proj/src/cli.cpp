#include "litpipe/cli.hpp"

#include "litpipe/pipeline.hpp"
#include "litpipe/service_api.hpp"
#include "litpipe/text.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace litpipe::cli {

int exit_code_for(ErrorCode code) {
    int status = http_status_for(code);
    return status >= 500 || status == 429 || code == ErrorCode::NoCandidatesFound ? kExitUpstream : kExitUser;
}

namespace {

struct Options {
    // shared
    std::string replay_dir;
    std::string config_file;
    std::string sessions_dir;
    std::string out_file;
    bool json_output = false;
    int verbosity = 0;
    std::string s2_base;
    std::string openalex_base;
    std::string llm_base;
    std::optional<std::size_t> top_k;
    std::string rerank_method;
    std::vector<std::string> sources;

    // inputs
    std::string abstract_file;
    std::string query;
    std::vector<std::string> keywords;
    std::vector<std::string> seeds;
    std::string plan;
    std::string session_file;
    std::string candidates_file;
    std::string sort;
    bool pin = false;

    // serve / record
    std::string host = "127.0.0.1";
    int port = 8787;
    std::string cassette_dir;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::InvalidArgument, "cannot read '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << content)) fail(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
}

json read_json_file(const std::string& path) {
    json doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) fail(ErrorCode::InvalidArgument, "'" + path + "' is not valid JSON");
    return doc;
}

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream in(item);
        std::string part;
        while (std::getline(in, part, ',')) {
            auto trimmed = text::trim(part);
            if (!trimmed.empty()) out.emplace_back(trimmed);
        }
    }
    return out;
}

void configure_logging(int verbosity) {
    if (!spdlog::get("litpipe-cli")) {
        spdlog::set_default_logger(spdlog::stderr_color_mt("litpipe-cli"));
        spdlog::set_pattern("[%l] %v");
    }
    spdlog::set_level(verbosity >= 2 ? spdlog::level::debug
                      : verbosity == 1 ? spdlog::level::info
                                       : spdlog::level::warn);
}

/// Defaults, then the replay directory's config.json, then --config, then flags.
PipelineConfig load_config(const Options& o) {
    PipelineConfig config;
    if (!o.replay_dir.empty()) {
        auto replay_config = fs::path(o.replay_dir) / "config.json";
        if (fs::exists(replay_config)) config = merge_config(config, read_json_file(replay_config.string()));
    }
    if (!o.config_file.empty()) config = merge_config(config, read_json_file(o.config_file));
    json flags = json::object();
    if (o.top_k) flags["top_k"] = *o.top_k;
    if (!o.rerank_method.empty()) flags["rerank_method"] = o.rerank_method;
    if (!o.sources.empty()) flags["sources"] = split_commas(o.sources);
    return merge_config(config, flags);
}

PipelineServices make_cli_services(const Options& o, bool record) {
    RuntimeOptions ro;
    ro.credentials = credentials_from_env();
    if (!o.s2_base.empty()) ro.endpoints.s2_base = o.s2_base;
    if (!o.openalex_base.empty()) ro.endpoints.openalex_base = o.openalex_base;
    if (!o.llm_base.empty()) ro.llm.base_url = o.llm_base;
    if (record) {
        ro.mode = BackendMode::Record;
        ro.cassette_dir = o.cassette_dir;
    } else if (!o.replay_dir.empty()) {
        ro.mode = BackendMode::Replay;
        ro.cassette_dir = o.replay_dir;
    }
    return make_services(ro);
}

std::shared_ptr<SessionStore> make_store(const Options& o) {
    if (o.sessions_dir.empty()) return nullptr;
    return std::make_shared<SessionStore>(o.sessions_dir);
}

QuerySpec query_spec(const Options& o) {
    QuerySpec spec;
    if (!o.abstract_file.empty()) spec.abstract_text = read_file(o.abstract_file);
    spec.user_keywords = split_commas(o.keywords);
    spec.seed_ids = o.seeds;
    return spec;
}

std::optional<SentencePlan> plan_option(const Options& o) {
    if (o.plan.empty()) return std::nullopt;
    return parse_plan(o.plan);
}

std::string paper_line(std::size_t marker, const PaperRecord& p) {
    std::string line = "[" + std::to_string(marker) + "] " + p.title;
    if (p.year) line += " (" + std::to_string(*p.year) + ")";
    if (p.citation_count) line += ", " + std::to_string(*p.citation_count) + " citations";
    return line;
}

void print_session(std::ostream& out, const PipelineSession& session) {
    out << "session: " << session.session_id << "\n";
    if (session.query_spec.synthesized_query) out << "query: " << *session.query_spec.synthesized_query << "\n";
    out << "candidates (" << session.candidates.size() << " of " << session.retrieved_count << " retrieved, "
        << to_string(session.ranked.method) << "):\n";
    for (const auto& view : candidate_view(session)) out << "  " << paper_line(view.marker, view.paper) << "\n";
    for (std::size_t i = 0; i < session.drafts.size(); ++i) {
        const auto& d = session.drafts[i];
        out << "\ndraft " << i + 1 << " (" << to_string(d.mode);
        if (d.plan_used) out << ": " << render_plan(*d.plan_used);
        out << "):\n" << d.text << "\n";
        if (d.compliance) {
            out << "compliance: " << (d.compliance->fully_compliant ? "full" : "partial") << ", "
                << d.compliance->sentence_count_observed << " sentences";
            for (const auto& check : d.compliance->per_directive) {
                out << ", line " << check.line << (check.satisfied ? " ok" : " missing");
            }
            out << "\n";
        }
    }
    for (const auto& e : session.errors) out << "error in " << e.stage << ": " << e.code << ": " << e.message << "\n";
}

void emit_session(std::ostream& out, const Options& o, const PipelineSession& session) {
    if (!o.out_file.empty()) write_session_file(o.out_file, session);
    if (o.json_output) {
        out << json(session).dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else {
        print_session(out, session);
    }
}

int cmd_run(const Options& o, bool record, std::ostream& out) {
    auto spec = query_spec(o);
    spec.validate();
    auto plan = plan_option(o);
    Pipeline pipeline(make_cli_services(o, record), make_store(o));
    auto session = pipeline.run_pipeline(spec, load_config(o), plan);
    emit_session(out, o, session);
    if (record) spdlog::info("cassettes written to {}", o.cassette_dir);
    return kExitOk;
}

int cmd_search(const Options& o, std::ostream& out) {
    auto spec = query_spec(o);
    auto config = load_config(o);
    auto services = make_cli_services(o, false);
    auto audit = std::make_shared<AuditLog>();
    LlmGateway gateway(services.llm, services.gateway, audit);

    std::optional<std::string> query;
    if (!o.query.empty()) {
        query = merge_user_keywords(o.query, spec.user_keywords);
    } else if (spec.has_abstract()) {
        QuerySynthesisOptions qo;
        qo.model = config.models.query;
        qo.temperature = config.temperatures.query;
        qo.max_query_words = config.max_query_words;
        query = merge_user_keywords(summarize_abstract_to_query(gateway, spec.abstract_text, qo), spec.user_keywords);
    } else if (!spec.user_keywords.empty()) {
        query = merge_user_keywords("", spec.user_keywords);
    }
    if (!query && spec.seed_ids.empty()) fail(ErrorCode::InvalidArgument, "search needs --query, --abstract-file, --keywords or --seed");

    SemanticScholarClient s2(services.s2_transport, services.credentials, services.endpoints.s2_base);
    OpenAlexClient openalex(services.openalex_transport, services.credentials, services.endpoints.openalex_base);
    const int limit = static_cast<int>(config.per_source_limit);
    std::vector<SearchBatch> batches;
    if (query && config.sources.contains(Source::S2)) batches.push_back(s2.search(*query, limit));
    for (const auto& seed : spec.seed_ids) batches.push_back(s2.recommend(seed, limit));
    if (query && config.sources.contains(Source::OpenAlex)) batches.push_back(openalex.search(*query, limit));

    std::vector<std::vector<SourceRecord>> records;
    for (const auto& b : batches) records.push_back(b.records);
    auto candidates = sort_papers(merge_and_dedup(records), config.sort_key);

    json doc{{"query", query ? json(*query) : json(nullptr)}, {"candidates", candidates}, {"audit", audit->snapshot()}};
    if (!o.out_file.empty()) write_file(o.out_file, doc.dump(2) + "\n");
    if (o.json_output) {
        out << doc.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else {
        if (query) out << "query: " << *query << "\n";
        for (std::size_t i = 0; i < candidates.size(); ++i) out << paper_line(i + 1, candidates[i]) << "\n";
    }
    return kExitOk;
}

int cmd_rerank(const Options& o, std::ostream& out) {
    json doc = read_json_file(o.candidates_file);
    const json& list = doc.is_object() && doc.contains("candidates") ? doc.at("candidates") : doc;
    std::vector<PaperRecord> candidates;
    try {
        candidates = list.get<std::vector<PaperRecord>>();
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, "'" + o.candidates_file + "' holds no candidate list: " + e.what());
    }
    auto config = load_config(o);
    candidates = truncate_candidates(candidates, config.top_k);

    std::string topic;
    if (!o.abstract_file.empty()) topic = read_file(o.abstract_file);
    else if (!o.query.empty()) topic = o.query;
    else if (doc.is_object() && doc.contains("query") && doc["query"].is_string()) topic = doc["query"].get<std::string>();
    if (text::trim(topic).empty()) fail(ErrorCode::EmptyAbstract, "rerank needs --abstract-file or --query");

    auto services = make_cli_services(o, false);
    auto audit = std::make_shared<AuditLog>();
    LlmGateway gateway(services.llm, services.gateway, audit);
    RerankOptions ro;
    ro.model = config.models.rerank;
    ro.temperature = config.temperatures.rerank;
    ro.max_rerank = config.max_rerank;
    ro.abstract_char_cap = config.abstract_char_cap;
    ro.reprompt_on_unparseable = config.reprompt_on_unparseable;
    ro.debate_concurrency = config.debate_concurrency;

    RankedList ranked;
    std::vector<DebateVerdict> verdicts;
    switch (config.rerank_method) {
        case RankMethod::Permutation: ranked = rerank_by_permutation(gateway, topic, candidates, ro); break;
        case RankMethod::Debate: ranked = rerank_by_debate(gateway, topic, candidates, ro, &verdicts); break;
        case RankMethod::SourceOrder: ranked = source_order(candidates.size()); break;
    }
    auto ordered = apply_ranking(candidates, ranked);

    json result{{"ranked", ranked}, {"candidates", ordered}, {"debate_verdicts", verdicts}, {"audit", audit->snapshot()}};
    if (!o.out_file.empty()) write_file(o.out_file, result.dump(2) + "\n");
    if (o.json_output) {
        out << result.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else {
        for (std::size_t i = 0; i < ordered.size(); ++i) out << paper_line(i + 1, ordered[i]) << "\n";
        if (!ranked.repairs_applied.empty()) out << "repairs: " << text::join(ranked.repairs_applied, ", ") << "\n";
    }
    return kExitOk;
}

int cmd_generate(const Options& o, std::ostream& out) {
    auto session = read_session_file(o.session_file);
    std::optional<SortKey> sort;
    if (!o.sort.empty()) sort = sort_key_from_string(o.sort);
    Pipeline pipeline(make_cli_services(o, false));
    session = pipeline.regenerate_session(std::move(session), plan_option(o), sort, o.pin);

    Options emit = o;
    if (emit.out_file.empty()) emit.out_file = o.session_file;
    if (!emit.out_file.empty()) write_session_file(emit.out_file, session);
    if (o.json_output) {
        out << json(session.drafts.back()).dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else {
        print_session(out, session);
    }
    return kExitOk;
}

ApiServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const Options& o) {
    auto store = make_store(o);
    if (!store) store = std::make_shared<SessionStore>("sessions");
    auto pipeline = std::make_shared<Pipeline>(make_cli_services(o, false), store);
    ApiServer server(pipeline, load_config(o), ServiceOptions{o.host, o.port, "*"});
    g_server = &server;
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    bool ok = server.listen();
    g_server = nullptr;
    if (!ok) fail(ErrorCode::InvalidArgument, "cannot listen on " + o.host + ":" + std::to_string(o.port));
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Retrieve, rerank and draft related-work sections from scholarly APIs and an LLM.", "litpipe"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    auto add_shared = [&](CLI::App* sub) {
        sub->add_option("--replay", o.replay_dir, "Serve every upstream call from cassettes in DIR")->type_name("DIR");
        sub->add_option("--config", o.config_file, "JSON config overrides")->type_name("FILE");
        sub->add_flag("--json", o.json_output, "Emit one JSON document on stdout");
        sub->add_flag("-v,--verbose", o.verbosity, "More logging on stderr (repeatable)");
        sub->add_option("--top-k", o.top_k, "Candidates kept for reranking");
        sub->add_option("--rerank-method", o.rerank_method, "permutation, debate or source_order");
        sub->add_option("--sources", o.sources, "Comma-separated: s2, openalex");
        sub->add_option("--s2-base", o.s2_base, "Semantic Scholar base URL")->group("Endpoints");
        sub->add_option("--openalex-base", o.openalex_base, "OpenAlex base URL")->group("Endpoints");
        sub->add_option("--llm-base", o.llm_base, "Chat-completion base URL")->group("Endpoints");
    };
    auto add_query = [&](CLI::App* sub) {
        sub->add_option("--abstract-file", o.abstract_file, "Research abstract")->type_name("FILE");
        sub->add_option("--keywords", o.keywords, "Extra keywords, comma-separated (repeatable)");
        sub->add_option("--seed", o.seeds, "Seed paper id: arXiv id, S2 id or CorpusId:N (repeatable)");
    };

    auto* run_cmd = app.add_subcommand("run", "Run the full pipeline");
    add_shared(run_cmd);
    add_query(run_cmd);
    run_cmd->add_option("--plan", o.plan, "Sentence plan for an extra plan-based draft");
    run_cmd->add_option("--out", o.out_file, "Write the session document here")->type_name("FILE");
    run_cmd->add_option("--sessions-dir", o.sessions_dir, "Also store the session in DIR")->type_name("DIR");

    auto* record_cmd = app.add_subcommand("record", "Run the pipeline live and write cassettes");
    add_shared(record_cmd);
    add_query(record_cmd);
    record_cmd->add_option("--cassettes", o.cassette_dir, "Cassette output directory")->required()->type_name("DIR");
    record_cmd->add_option("--plan", o.plan, "Sentence plan for an extra plan-based draft");
    record_cmd->add_option("--out", o.out_file, "Write the session document here")->type_name("FILE");

    auto* search_cmd = app.add_subcommand("search", "Query synthesis and retrieval only");
    add_shared(search_cmd);
    add_query(search_cmd);
    search_cmd->add_option("--query", o.query, "Use this keyword query instead of synthesizing one");
    search_cmd->add_option("--out", o.out_file, "Write the candidate list here")->type_name("FILE");

    auto* rerank_cmd = app.add_subcommand("rerank", "Rerank a candidate file");
    add_shared(rerank_cmd);
    rerank_cmd->add_option("--candidates", o.candidates_file, "Output of `search`")->required()->type_name("FILE");
    rerank_cmd->add_option("--abstract-file", o.abstract_file, "Research abstract")->type_name("FILE");
    rerank_cmd->add_option("--query", o.query, "Rank against this text instead of an abstract");
    rerank_cmd->add_option("--out", o.out_file, "Write the ranking here")->type_name("FILE");

    auto* generate_cmd = app.add_subcommand("generate", "Append a draft to a session document");
    add_shared(generate_cmd);
    generate_cmd->add_option("--session", o.session_file, "Session document")->required()->type_name("FILE");
    generate_cmd->add_option("--plan", o.plan, "Sentence plan");
    generate_cmd->add_option("--sort", o.sort, "Candidate view sort: relevance, citations or year");
    generate_cmd->add_flag("--pin", o.pin, "Generate over the sorted order instead of the LLM ranking");
    generate_cmd->add_option("--out", o.out_file, "Write the session here instead of in place")->type_name("FILE");

    auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
    add_shared(serve_cmd);
    serve_cmd->add_option("--host", o.host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", o.port, "Port")->capture_default_str();
    serve_cmd->add_option("--sessions-dir", o.sessions_dir, "Session directory (default ./sessions)")->type_name("DIR");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUser;
    }

    configure_logging(o.verbosity);

    CLI::App* chosen = app.get_subcommands().front();
    try {
        if (chosen == run_cmd || chosen == record_cmd) {
            if (o.abstract_file.empty() && split_commas(o.keywords).empty() && o.seeds.empty()) {
                err << "error: give --abstract-file, --keywords or --seed\n\n" << chosen->help();
                return kExitUser;
            }
            return cmd_run(o, chosen == record_cmd, out);
        }
        if (chosen == search_cmd) return cmd_search(o, out);
        if (chosen == rerank_cmd) return cmd_rerank(o, out);
        if (chosen == generate_cmd) return cmd_generate(o, out);
        return cmd_serve(o);
    } catch (const Error& e) {
        err << "error: " << to_string(e.code());
        if (e.stage()) err << " (stage " << *e.stage() << ")";
        err << ": " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUser;
    }
}

}  // namespace litpipe::cli
