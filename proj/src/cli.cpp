#include "spark/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "spark/config.hpp"
#include "spark/http_backend.hpp"
#include "spark/judge_data.hpp"
#include "spark/mock_backend.hpp"
#include "spark/pipeline.hpp"
#include "spark/session.hpp"
#include "spark/workspace.hpp"

namespace spark {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return 2;
        case ErrorKind::backend: return 3;
        case ErrorKind::parse:
        case ErrorKind::validation: return 4;
        case ErrorKind::incomplete: return 5;
    }
    return 1;
}

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
    std::string config;
    std::string workspace;
    std::string mock_script;
    bool verbose = false;
    bool quiet = false;
};

void configure_logging(const GlobalOptions& g) {
    auto logger = spdlog::get("spark");
    if (!logger) {
        logger = spdlog::stderr_color_mt("spark");
        spdlog::set_default_logger(logger);
    }
    spdlog::set_level(g.verbose ? spdlog::level::debug
                      : g.quiet ? spdlog::level::err
                                : spdlog::level::warn);
}

/// Backends, clock, search client and workspace for one command.
struct Runtime {
    PipelineConfig config;
    std::unique_ptr<Workspace> ws;
    std::unique_ptr<Clock> clock;
    std::map<Role, std::shared_ptr<Backend>> backends;
    std::unique_ptr<SearchClient> search;
    std::optional<std::string> default_question;
    std::size_t embedding_dim = kDefaultEmbeddingDim;

    explicit Runtime(const GlobalOptions& g) {
        config = PipelineConfig::load(g.config.empty() ? std::nullopt
                                                       : std::optional<fs::path>(g.config));
        if (!g.workspace.empty()) config.workspace = g.workspace;
        ws = std::make_unique<Workspace>(config.workspace);

        if (!g.mock_script.empty()) {
            auto script = MockScriptFile::load(g.mock_script);
            auto mock = std::make_shared<MockBackend>(script.chat, script.embedding_dim);
            for (Role r : kAllRoles) backends[r] = mock;
            search = std::make_unique<FixtureSearchClient>(FixtureSearchClient::from_json(script.search));
            clock = std::make_unique<StepClock>();
            default_question = script.question;
            embedding_dim = script.embedding_dim;
            return;
        }
        for (Role r : kAllRoles) backends[r] = std::make_shared<HttpBackend>(config.role(r).backend);
        if (config.search_fixture) {
            std::ifstream in(*config.search_fixture, std::ios::binary);
            if (!in) throw UsageError("cannot read search fixture " + config.search_fixture->string());
            auto j = json::parse(in, nullptr, false);
            if (j.is_discarded()) throw ParseError(config.search_fixture->string() + " is not valid JSON");
            search = std::make_unique<FixtureSearchClient>(FixtureSearchClient::from_json(j));
        }
        clock = std::make_unique<SystemClock>();
        embedding_dim = config.role(Role::embedder).backend.embedding_dim;
    }

    Backend& backend(Role r) { return *backends.at(r); }

    Xplor make_xplor(Corpus& corpus, FlatIndex& index) {
        Xplor::Roles roles{backend(Role::embedder), backend(Role::scorer),
                           config.role(Role::embedder).backend.embedding_model,
                           config.role(Role::scorer).chat_settings()};
        return Xplor(config.xplor, config.chunking, corpus, index, roles, search.get(), *clock);
    }
};

void print_json_lines(std::ostream& out, const json& rows) {
    for (const auto& r : rows) out << r.dump() << "\n";
}

int cmd_ingest(Runtime& rt, const std::vector<std::string>& files, std::ostream& out) {
    WorkspaceLock lock(*rt.ws);
    Corpus corpus = rt.ws->load_corpus();
    FlatIndex index = rt.ws->load_index(rt.embedding_dim);
    Xplor xplor = rt.make_xplor(corpus, index);
    for (const auto& f : files) {
        std::string locator = fs::absolute(f).lexically_normal().string();
        if (corpus.has_locator(locator)) {
            out << "skipped " << f << " (already ingested)\n";
            continue;
        }
        const Document& doc = corpus.ingest(read_text_file(f), fs::path(f).stem().string(),
                                            SourceKind::paper, locator, *rt.clock);
        std::string id = doc.id;
        xplor.index_document(id);
        out << "ingested " << id << " " << f << " (" << corpus.chunks_of(id).size()
            << " chunks)\n";
    }
    rt.ws->save_corpus(corpus);
    rt.ws->save_index(index);
    return 0;
}

int cmd_index_build(Runtime& rt, std::ostream& out) {
    WorkspaceLock lock(*rt.ws);
    Corpus corpus = rt.ws->load_corpus();
    FlatIndex index(rt.embedding_dim);
    std::vector<Chunk> pending;
    for (const auto& c : corpus.chunks()) {
        if (c.embedding && c.embedding->dim == rt.embedding_dim)
            index.add(c.id, *c.embedding);
        else
            pending.push_back(c);
    }
    const std::string& model = rt.config.role(Role::embedder).backend.embedding_model;
    constexpr std::size_t kBatch = 64;
    for (std::size_t begin = 0; begin < pending.size(); begin += kBatch) {
        std::size_t end = std::min(pending.size(), begin + kBatch);
        std::vector<std::string> texts;
        for (std::size_t i = begin; i < end; ++i) texts.push_back(pending[i].text);
        auto vectors = rt.backend(Role::embedder).embed_texts(texts, model);
        for (std::size_t i = begin; i < end; ++i) {
            index.add(pending[i].id, vectors[i - begin]);
            corpus.find_chunk(pending[i].id)->embedding = vectors[i - begin];
        }
    }
    rt.ws->save_corpus(corpus);
    rt.ws->save_index(index);
    out << "indexed " << index.size() << " chunks (" << pending.size() << " embedded)\n";
    return 0;
}

int cmd_index_stats(Runtime& rt, std::ostream& out) {
    Corpus corpus = rt.ws->load_corpus();
    FlatIndex index = rt.ws->load_index(rt.embedding_dim);
    out << json{{"documents", corpus.documents().size()},
                {"chunks", corpus.chunks().size()},
                {"indexed", index.size()},
                {"dim", index.dim()}}
               .dump()
        << "\n";
    return 0;
}

fs::path next_session_path(const Workspace& ws) {
    std::size_t n = 1;
    while (fs::exists(ws.sessions_dir() / ("session_" + std::to_string(n) + ".jsonl"))) ++n;
    return ws.sessions_dir() / ("session_" + std::to_string(n) + ".jsonl");
}

int cmd_ask(Runtime& rt, bool interactive, std::string question, std::istream& in,
            std::ostream& out) {
    if (!interactive && question.empty()) question = rt.default_question.value_or("");
    if (!interactive && question.empty())
        throw UsageError("ask needs --question or --interactive");
    WorkspaceLock lock(*rt.ws);
    Corpus corpus = rt.ws->load_corpus();
    FlatIndex index = rt.ws->load_index(rt.embedding_dim);
    Xplor xplor = rt.make_xplor(corpus, index);
    XplorSession session(xplor, SessionMode::interactive, *rt.clock, next_session_path(*rt.ws));
    if (interactive) {
        run_interactive(session, in, out);
    } else {
        out << session.ask(question).answer << "\n";
    }
    rt.ws->save_corpus(corpus);
    rt.ws->save_index(index);
    return 0;
}

std::string require_question(const Runtime& rt, const std::string& given) {
    std::string q = trim(given.empty() ? rt.default_question.value_or("") : given);
    if (q.empty()) throw UsageError("--question is required");
    return q;
}

int cmd_generate(Runtime& rt, const std::string& question_opt, std::ostream& out) {
    std::string question = require_question(rt, question_opt);
    WorkspaceLock lock(*rt.ws);
    Corpus corpus = rt.ws->load_corpus();
    FlatIndex index = rt.ws->load_index(rt.embedding_dim);
    Xplor xplor = rt.make_xplor(corpus, index);

    EvidenceSet evidence = xplor.evidence_loop(question);
    rt.ws->save_corpus(corpus);
    rt.ws->save_index(index);
    append_jsonl(rt.ws->evidence_path(), json(evidence));
    if (evidence.empty()) throw IncompleteError("no evidence reached the inclusion threshold");

    auto settings = rt.config.role(Role::generator).chat_settings();
    ConceptSet concepts = extract_concepts_and_problems(evidence, rt.backend(Role::generator), settings);
    IdeaGenerator generator(rt.config.ideagen, rt.backend(Role::generator), settings);
    auto ideas = generator.generate_all(evidence, concepts);
    for (const auto& idea : ideas) append_jsonl(rt.ws->ideas_path(), json(idea));
    print_json_lines(out, json(ideas));
    return 0;
}

int cmd_filter(Runtime& rt, const std::string& in_path, const std::string& out_path,
               int reviews, std::ostream& out) {
    fs::path src = in_path.empty() ? rt.ws->ideas_path() : fs::path(in_path);
    fs::path dst = out_path.empty() ? rt.ws->decisions_path() : fs::path(out_path);
    auto ideas = load_records<IdeaProposal>(src);
    FilterConfig fc = rt.config.filter;
    if (reviews > 0) fc.reviews_per_idea = reviews;
    FilterRoles roles{rt.backend(Role::reviewer), rt.config.role(Role::reviewer).chat_settings(),
                      rt.backend(Role::decider), rt.config.role(Role::decider).chat_settings()};
    auto outcomes = filter_batch(ideas, fc, roles);
    store_records(dst, outcomes);

    std::size_t failed = 0;
    for (const auto& o : outcomes) {
        if (o.decision)
            out << o.idea_id << " " << json(o.decision->decision).get<std::string>()
                << " utility=" << o.decision->utility << "\n";
        else {
            out << o.idea_id << " ERROR " << o.error.value_or("") << "\n";
            ++failed;
        }
    }
    if (failed) throw IncompleteError(std::to_string(failed) + " of " +
                                      std::to_string(outcomes.size()) + " ideas were not decided");
    return 0;
}

int cmd_run(Runtime& rt, const std::string& question_opt, const std::string& report_out,
            std::ostream& out) {
    std::string question = require_question(rt, question_opt);
    WorkspaceLock lock(*rt.ws);
    Corpus corpus = rt.ws->load_corpus();
    FlatIndex index = rt.ws->load_index(rt.embedding_dim);
    Xplor xplor = rt.make_xplor(corpus, index);
    Pipeline pipeline(rt.config, xplor,
                      {rt.backend(Role::generator), rt.backend(Role::reviewer),
                       rt.backend(Role::decider)},
                      *rt.clock);
    PipelineReport report = pipeline.run(question);

    rt.ws->save_corpus(corpus);
    rt.ws->save_index(index);
    if (!report.evidence.id.empty()) append_jsonl(rt.ws->evidence_path(), json(report.evidence));
    for (const auto& ev : report.refinement_evidence) append_jsonl(rt.ws->evidence_path(), json(ev));
    for (const auto& idea : report.ideas) append_jsonl(rt.ws->ideas_path(), json(idea));
    for (const auto& o : report.outcomes) append_jsonl(rt.ws->decisions_path(), json(o));

    json j = report;
    fs::path path = rt.ws->save_report(j);
    if (!report_out.empty()) {
        if (fs::path(report_out).has_parent_path())
            fs::create_directories(fs::path(report_out).parent_path());
        std::ofstream f(report_out, std::ios::binary | std::ios::trunc);
        if (!f) throw UsageError("cannot write " + report_out);
        f << render_report(j);
    }
    out << "report " << path.string() << "\n";
    out << "ideas " << report.ideas.size() << ", reviews " << report.review_count()
        << ", decisions " << report.decisions().size() << ", accepted "
        << report.accepted_ideas.size() << "\n";
    if (!report.complete)
        throw IncompleteError("pipeline incomplete at " + report.incomplete_stage.value_or("?") +
                              ": " + report.error.value_or(""));
    return 0;
}

int cmd_build_judge(Runtime& rt, const std::string& dump, const std::string& cutoff_text,
                    const std::string& out_dir_opt, bool skip_annotation, std::ostream& out) {
    auto cutoff = parse_date(cutoff_text);
    if (!cutoff) throw UsageError("--cutoff must be YYYY-MM-DD, got '" + cutoff_text + "'");
    fs::path out_dir = out_dir_opt.empty() ? rt.ws->root() / "judge" : fs::path(out_dir_opt);

    ExtractReport extracted = extract_pairs(dump);
    if (!skip_annotation)
        annotate_pairs(extracted.pairs, rt.backend(Role::annotator),
                       rt.config.role(Role::annotator).chat_settings());
    auto records = build_training_records(extracted.pairs);
    auto split = temporal_split(records, *cutoff);

    store_records(out_dir / "pairs.jsonl", extracted.pairs);
    store_records(out_dir / "records_train.jsonl", split.train);
    store_records(out_dir / "records_test.jsonl", split.test);

    std::size_t flagged = 0;
    for (const auto& p : extracted.pairs) flagged += p.idea_flagged ? 1 : 0;
    json summary = extracted;
    summary.erase("pairs");
    summary["pairs"] = extracted.pairs.size();
    summary["flagged"] = flagged;
    summary["records"] = records.size();
    summary["train"] = split.train.size();
    summary["test"] = split.test.size();
    out << summary.dump() << "\n";
    return 0;
}

int cmd_eval_judge(const std::string& pred, const std::string& actual, std::ostream& out) {
    auto p = load_scores(pred);
    auto a = load_scores(actual);
    out << json{{"n", p.size()}, {"rmse", score_rmse(p, a)}}.dump() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in) {
    CLI::App app{"spark: retrieval-augmented research idea generation"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--workspace", g.workspace, "Workspace directory");
    app.add_option("--mock-script", g.mock_script, "Deterministic replay script")
        ->check(CLI::ExistingFile);
    app.add_flag("-v,--verbose", g.verbose, "Debug logging");
    app.add_flag("-q,--quiet", g.quiet, "Errors only");

    std::vector<std::string> files;
    auto* ingest = app.add_subcommand("ingest", "Add plain-text papers to the corpus and index");
    ingest->add_option("files", files)->required()->check(CLI::ExistingFile);

    auto* index = app.add_subcommand("index", "Vector index maintenance");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "Re-embed missing chunks and rebuild");
    auto* index_stats = index->add_subcommand("stats", "Print corpus and index sizes");

    bool interactive = false;
    std::string question;
    auto* ask = app.add_subcommand("ask", "Answer a question from retrieved evidence");
    ask->add_flag("--interactive", interactive, "Read questions from the terminal");
    ask->add_option("--question", question);

    auto* gen = app.add_subcommand("generate-ideas", "Retrieve evidence and propose ideas");
    gen->add_option("--question", question);

    std::string in_path, out_path;
    int reviews = 0;
    auto* filt = app.add_subcommand("filter-ideas", "Review and decide stored ideas");
    filt->add_option("--in", in_path, "ideas.jsonl (default: workspace ideas)");
    filt->add_option("--out", out_path, "decisions.jsonl (default: workspace decisions)");
    filt->add_option("--reviews", reviews, "Reviews per idea")->check(CLI::PositiveNumber);

    std::string report_out;
    auto* run = app.add_subcommand("run", "Full pipeline");
    run->add_option("--question", question);
    run->add_option("--report-out", report_out, "Also write the report here");

    std::string dump, cutoff, judge_out;
    bool skip_annotation = false;
    auto* judge = app.add_subcommand("build-judge-dataset", "Build reviewer training records");
    judge->add_option("--dump", dump)->required()->check(CLI::ExistingFile);
    judge->add_option("--cutoff", cutoff)->required();
    judge->add_option("--out-dir", judge_out, "Output directory (default: <workspace>/judge)");
    judge->add_flag("--skip-annotation", skip_annotation, "Keep original-text records only");

    std::string pred, actual;
    auto* eval = app.add_subcommand("eval-judge", "RMSE between predicted and actual scores");
    eval->add_option("--pred", pred)->required()->check(CLI::ExistingFile);
    eval->add_option("--actual", actual)->required()->check(CLI::ExistingFile);

    std::vector<std::string> argv_store{"spark"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : exit_code_for(ErrorKind::usage);
    }

    configure_logging(g);
    try {
        if (*eval) return cmd_eval_judge(pred, actual, out);
        Runtime rt(g);
        if (*ingest) return cmd_ingest(rt, files, out);
        if (*index_build) return cmd_index_build(rt, out);
        if (*index_stats) return cmd_index_stats(rt, out);
        if (*ask) return cmd_ask(rt, interactive, question, in, out);
        if (*gen) return cmd_generate(rt, question, out);
        if (*filt) return cmd_filter(rt, in_path, out_path, reviews, out);
        if (*run) return cmd_run(rt, question, report_out, out);
        if (*judge) return cmd_build_judge(rt, dump, cutoff, judge_out, skip_annotation, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(ErrorKind::parse);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code_for(ErrorKind::usage);
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr, std::cin);
}

}  // namespace spark
