#include "spark/xplor.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include <spdlog/spdlog.h>

#include "spark/mmr.hpp"
#include "spark/prompts.hpp"
#include "spark/text.hpp"

namespace spark {

std::vector<std::string> EvidenceSet::source_ids() const {
    std::vector<std::string> out;
    for (const auto& s : snippets)
        if (std::find(out.begin(), out.end(), s.source_id) == out.end()) out.push_back(s.source_id);
    return out;
}

void XplorConfig::validate() const {
    if (min_evidence < 1) throw UsageError("min_evidence must be positive");
    if (min_distinct_sources < 1) throw UsageError("min_distinct_sources must be positive");
    if (max_iterations < 1) throw UsageError("max_iterations must be positive");
    if (candidates_per_query < 1) throw UsageError("candidates_per_query must be positive");
    if (!(mmr_lambda >= 0.0 && mmr_lambda <= 1.0)) throw UsageError("mmr_lambda must be in [0, 1]");
    if (mmr_select < 1) throw UsageError("mmr_select must be positive");
    if (scale_max < 1) throw UsageError("scale_max must be positive");
    if (inclusion_threshold < 0 || inclusion_threshold > scale_max)
        throw UsageError("inclusion_threshold must be in [0, scale_max]");
}

void to_json(json& j, const RelevanceAssessment& a) {
    j = json{{"chunk_id", a.chunk_id}, {"summary", a.summary}, {"score", a.score},
             {"scale_max", a.scale_max}};
}

void to_json(json& j, const EvidenceSnippet& s) {
    j = json{{"chunk_id", s.chunk_id}, {"source_id", s.source_id},
             {"source_kind", s.source_kind}, {"summary", s.summary},
             {"score", s.score}, {"iteration", s.iteration}};
}

void from_json(const json& j, EvidenceSnippet& s) {
    s.chunk_id = j.at("chunk_id").get<std::string>();
    s.source_id = j.at("source_id").get<std::string>();
    s.source_kind = j.at("source_kind").get<SourceKind>();
    s.summary = j.at("summary").get<std::string>();
    s.score = j.at("score").get<int>();
    s.iteration = j.at("iteration").get<int>();
}

void to_json(json& j, const EvidenceSet& e) {
    j = json{{"id", e.id},
             {"question", e.question},
             {"snippets", e.snippets},
             {"queries_issued", e.queries_issued},
             {"iterations_used", e.iterations_used},
             {"scale_max", e.scale_max}};
}

void from_json(const json& j, EvidenceSet& e) {
    e.id = j.at("id").get<std::string>();
    e.question = j.at("question").get<std::string>();
    e.snippets = j.at("snippets").get<std::vector<EvidenceSnippet>>();
    e.queries_issued = j.at("queries_issued").get<std::vector<std::string>>();
    e.iterations_used = j.at("iterations_used").get<int>();
    e.scale_max = j.value("scale_max", 10);
}

void to_json(json& j, const XplorConfig& c) {
    j = json{{"min_evidence", c.min_evidence},
             {"min_distinct_sources", c.min_distinct_sources},
             {"max_iterations", c.max_iterations},
             {"candidates_per_query", c.candidates_per_query},
             {"mmr_lambda", c.mmr_lambda},
             {"mmr_select", c.mmr_select},
             {"inclusion_threshold", c.inclusion_threshold},
             {"scale_max", c.scale_max}};
}

void from_json(const json& j, XplorConfig& c) {
    XplorConfig d;
    c.min_evidence = j.value("min_evidence", d.min_evidence);
    c.min_distinct_sources = j.value("min_distinct_sources", d.min_distinct_sources);
    c.max_iterations = j.value("max_iterations", d.max_iterations);
    c.candidates_per_query = j.value("candidates_per_query", d.candidates_per_query);
    c.mmr_lambda = j.value("mmr_lambda", d.mmr_lambda);
    c.mmr_select = j.value("mmr_select", d.mmr_select);
    c.inclusion_threshold = j.value("inclusion_threshold", d.inclusion_threshold);
    c.scale_max = j.value("scale_max", d.scale_max);
}

void to_json(json& j, const CitedAnswer& a) {
    j = json{{"text", a.text}, {"cited_source_ids", a.cited_source_ids}};
}

namespace {

ChatRequest make_request(std::string_view system, std::string user, const ChatSettings& settings,
                         ResponseFormat format) {
    ChatRequest req;
    req.system_prompt = std::string(system);
    req.user_prompt = std::move(user);
    req.model_id = settings.model_id;
    req.temperature = settings.temperature;
    req.max_tokens = settings.max_tokens;
    req.response_format = format;
    return req;
}

std::optional<RelevanceAssessment> parse_assessment(const std::string& text,
                                                    const std::string& chunk_id, int scale_max) {
    auto obj = extract_json_object(text);
    if (!obj) return std::nullopt;
    if (!obj->contains("summary") || !(*obj)["summary"].is_string()) return std::nullopt;
    std::string summary = trim((*obj)["summary"].get<std::string>());
    if (summary.empty()) return std::nullopt;

    const json* rel = nullptr;
    for (const char* key : {"relevance", "score"})
        if (obj->contains(key)) {
            rel = &(*obj)[key];
            break;
        }
    if (!rel) return std::nullopt;
    double value = 0.0;
    if (rel->is_number()) {
        value = rel->get<double>();
    } else if (rel->is_string()) {
        try {
            value = std::stod(rel->get<std::string>());
        } catch (const std::exception&) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (!std::isfinite(value)) return std::nullopt;

    long score = std::lround(value);
    if (score < 0 || score > scale_max) {
        spdlog::warn("relevance {} for chunk {} outside [0, {}]; clamped", value, chunk_id,
                     scale_max);
        score = std::clamp<long>(score, 0, scale_max);
    }
    return RelevanceAssessment{chunk_id, std::move(summary), static_cast<int>(score), scale_max};
}

std::string normalize_query(const std::string& raw) {
    std::string line;
    std::istringstream in(raw);
    std::string candidate;
    while (std::getline(in, candidate)) {
        candidate = trim(candidate);
        if (!candidate.empty()) {
            line = candidate;
            break;
        }
    }
    // strip wrapping quotes/backticks, possibly nested
    auto is_quote = [](char c) { return c == '"' || c == '\'' || c == '`'; };
    while (line.size() >= 2 && is_quote(line.front()) && line.back() == line.front())
        line = trim(line.substr(1, line.size() - 2));
    while (!line.empty() && is_quote(line.front())) line = trim(line.substr(1));
    while (!line.empty() && is_quote(line.back())) line = trim(line.substr(0, line.size() - 1));
    return line;
}

bool already_issued(const std::string& q, const std::vector<std::string>& issued) {
    auto lq = to_lower(q);
    return std::any_of(issued.begin(), issued.end(),
                       [&](const std::string& s) { return to_lower(trim(s)) == lq; });
}

}  // namespace

RelevanceAssessment score_chunk_relevance(const std::string& question, const Chunk& chunk,
                                          Backend& backend, const ChatSettings& settings,
                                          int scale_max) {
    if (trim(chunk.text).empty()) throw UsageError("chunk " + chunk.id + " has no text");
    if (scale_max < 1) throw UsageError("scale_max must be positive");
    std::string user = render_template(prompts::kRelevanceUser,
                                       {{"question", question},
                                        {"chunk", chunk.text},
                                        {"scale_max", std::to_string(scale_max)}});
    auto req = make_request(prompts::kRelevanceSystem, user, settings, ResponseFormat::json_object);
    auto first = backend.chat_complete(req);
    if (auto a = parse_assessment(first.text, chunk.id, scale_max)) return *a;

    spdlog::info("relevance reply for {} did not parse; retrying once", chunk.id);
    req.user_prompt += prompts::kJsonRepair;
    auto second = backend.chat_complete(req);
    if (auto a = parse_assessment(second.text, chunk.id, scale_max)) return *a;
    throw ScoringParseError("relevance reply for chunk " + chunk.id +
                            " is not valid JSON with summary/relevance: " + prefix_of(second.text));
}

std::string generate_followup_query(const std::string& question,
                                    const std::vector<std::string>& summaries,
                                    const std::vector<std::string>& issued, int iteration,
                                    Backend& backend, const ChatSettings& settings) {
    if (summaries.empty()) throw UsageError("follow-up query needs at least one summary");
    std::string joined;
    for (const auto& s : summaries) joined += s + "\n";
    if (!joined.empty()) joined.pop_back();

    auto req = make_request(prompts::kFollowupSystem,
                            render_template(prompts::kFollowupUser,
                                            {{"question", question}, {"summaries", joined}}),
                            settings, ResponseFormat::free_text);
    auto query = normalize_query(backend.chat_complete(req).text);
    if (query.empty()) throw FollowupGenerationError("model returned an empty follow-up query");
    if (!already_issued(query, issued)) return query;

    std::string listed;
    for (const auto& q : issued) listed += "- " + q + "\n";
    req.user_prompt += render_template(prompts::kFollowupDifferent, {{"issued", listed}});
    auto retry = normalize_query(backend.chat_complete(req).text);
    if (retry.empty()) throw FollowupGenerationError("model returned an empty follow-up query");
    if (!already_issued(retry, issued)) return retry;

    for (int n = iteration;; ++n) {
        std::string candidate = retry + " (" + std::to_string(n) + ")";
        if (!already_issued(candidate, issued)) return candidate;
    }
}

CitedAnswer validate_citations(const std::string& answer,
                               const std::vector<std::string>& known_sources) {
    auto known = [&](const std::string& id) {
        return std::find(known_sources.begin(), known_sources.end(), id) != known_sources.end();
    };

    // split off a trailing "Sources:" block
    std::vector<std::string> lines;
    {
        std::istringstream in(answer);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    std::size_t body_end = lines.size();
    for (std::size_t i = lines.size(); i-- > 0;) {
        auto t = to_lower(trim(lines[i]));
        if (t == "sources:" || t == "sources") {
            body_end = i;
            break;
        }
    }

    std::vector<std::string> cited;
    auto note = [&](const std::string& id) {
        if (std::find(cited.begin(), cited.end(), id) == cited.end()) cited.push_back(id);
    };

    std::string body;
    for (std::size_t i = 0; i < body_end; ++i) {
        std::string line = lines[i];
        for (const auto& tok : bracket_tokens(line)) {
            if (known(tok)) {
                note(tok);
                continue;
            }
            spdlog::warn("dropping citation [{}] not present in evidence", tok);
            std::string needle = "[" + tok + "]";
            std::size_t pos;
            while ((pos = line.find(needle)) != std::string::npos) {
                std::size_t from = pos;
                if (from > 0 && line[from - 1] == ' ') --from;
                line.erase(from, pos + needle.size() - from);
            }
        }
        body += line + "\n";
    }
    for (std::size_t i = body_end + 1; i < lines.size(); ++i)
        for (const auto& tok : bracket_tokens(lines[i]))
            if (known(tok)) note(tok);

    CitedAnswer out;
    out.text = trim(body) + "\n\nSources:";
    for (const auto& id : cited) out.text += "\n[" + id + "]";
    out.cited_source_ids = std::move(cited);
    return out;
}

std::string render_evidence_context(const EvidenceSet& evidence) {
    std::string context;
    for (const auto& s : evidence.snippets)
        context += "[Source: " + s.source_id + "] " + s.summary + " (R: " + std::to_string(s.score) +
                   "/" + std::to_string(evidence.scale_max) + ")\n";
    if (!context.empty()) context.pop_back();
    return context;
}

CitedAnswer synthesize_answer(const std::string& question, const EvidenceSet& evidence,
                              Backend& backend, const ChatSettings& settings) {
    if (evidence.empty()) throw UsageError("cannot synthesize an answer from empty evidence");
    auto req = make_request(prompts::kSynthesisSystem,
                            render_template(prompts::kSynthesisUser,
                                            {{"context", render_evidence_context(evidence)},
                                             {"question", question}}),
                            settings, ResponseFormat::free_text);
    auto reply = backend.chat_complete(req);
    if (trim(reply.text).empty()) throw SynthesisError("model returned an empty answer");
    return validate_citations(reply.text, evidence.source_ids());
}

// ---- Xplor ----

Xplor::Xplor(XplorConfig config, ChunkingConfig chunking, Corpus& corpus, FlatIndex& index,
             Roles roles, SearchClient* search, Clock& clock)
    : config_(config),
      chunking_(chunking),
      corpus_(corpus),
      index_(index),
      roles_(std::move(roles)),
      search_(search),
      clock_(clock) {
    config_.validate();
}

void Xplor::index_document(const std::string& doc_id) {
    const Document* doc = corpus_.find_document(doc_id);
    if (!doc) throw UsageError("unknown document " + doc_id);
    auto chunks = chunk_document(*doc, chunking_.chunk_size, chunking_.overlap);
    constexpr std::size_t kBatch = 64;
    for (std::size_t begin = 0; begin < chunks.size(); begin += kBatch) {
        std::size_t end = std::min(chunks.size(), begin + kBatch);
        std::vector<std::string> texts;
        for (std::size_t i = begin; i < end; ++i) texts.push_back(chunks[i].text);
        auto vectors = roles_.embedder.embed_texts(texts, roles_.embedding_model);
        for (std::size_t i = begin; i < end; ++i) chunks[i].embedding = vectors[i - begin];
    }
    for (const auto& c : chunks) index_.add(c.id, *c.embedding);
    corpus_.add_chunks(std::move(chunks));
}

std::vector<Document> Xplor::external_search(const std::string& query) {
    if (trim(query).empty()) throw UsageError("search query is empty");
    if (!search_) return {};
    std::vector<SearchResult> results;
    try {
        results = search_->search(query);
    } catch (const std::exception& e) {
        spdlog::warn("search for '{}' failed: {}; continuing without results", query, e.what());
        return {};
    }
    std::vector<Document> added;
    for (const auto& r : results) {
        if (r.locator.empty() || corpus_.has_locator(r.locator)) continue;
        if (trim(r.body).empty()) {
            spdlog::warn("search result {} has no text; skipped", r.locator);
            continue;
        }
        const auto& doc = corpus_.ingest(r.body, r.title, SourceKind::search, r.locator, clock_,
                                         r.venue_date);
        index_document(doc.id);
        added.push_back(doc);
    }
    return added;
}

std::vector<RelevanceAssessment> Xplor::score_batch(const std::string& question,
                                                    const std::vector<const Chunk*>& chunks) {
    std::vector<std::future<RelevanceAssessment>> pending;
    pending.reserve(chunks.size());
    for (const Chunk* c : chunks)
        pending.push_back(std::async(std::launch::async, [this, &question, c] {
            return score_chunk_relevance(question, *c, roles_.scorer, roles_.scoring,
                                         config_.scale_max);
        }));
    std::vector<RelevanceAssessment> out;
    out.reserve(pending.size());
    std::exception_ptr first_error;
    for (auto& f : pending) {
        try {
            out.push_back(f.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

bool Xplor::stop_reached(const EvidenceSet& ev) const {
    return static_cast<int>(ev.snippets.size()) >= config_.min_evidence &&
           static_cast<int>(ev.source_ids().size()) >= config_.min_distinct_sources;
}

EvidenceSet Xplor::evidence_loop(const std::string& question) {
    if (trim(question).empty()) throw UsageError("question is empty");
    if (index_.size() == 0 && !search_)
        throw UsageError("evidence loop needs a non-empty index or a search client");

    EvidenceSet ev;
    ev.id = "ev_" + std::to_string(++loops_run_);
    ev.question = question;
    ev.queries_issued.push_back(question);
    ev.scale_max = config_.scale_max;

    std::set<std::string> admitted;
    std::string query = question;

    for (int iter = 0; iter < config_.max_iterations; ++iter) {
        ev.iterations_used = iter + 1;
        external_search(query);

        std::vector<RelevanceAssessment> fresh;
        if (index_.size() > 0) {
            auto qvec = roles_.embedder.embed_texts({query}, roles_.embedding_model).front();
            auto hits = index_.knn(qvec, static_cast<std::size_t>(config_.candidates_per_query));

            std::vector<const Chunk*> to_score;
            for (const auto& h : hits) {
                if (admitted.count(h.chunk_id) || score_cache_.count({question, h.chunk_id}))
                    continue;
                const Chunk* c = corpus_.find_chunk(h.chunk_id);
                if (!c) throw ValidationError("index references unknown chunk " + h.chunk_id);
                to_score.push_back(c);
            }
            fresh = score_batch(question, to_score);
            for (const auto& a : fresh) score_cache_[{question, a.chunk_id}] = a;

            std::vector<MmrCandidate> candidates;
            for (const auto& h : hits) {
                if (admitted.count(h.chunk_id)) continue;
                const auto& a = score_cache_.at({question, h.chunk_id});
                candidates.push_back({h.chunk_id, index_.unit_vector(h.chunk_id), a.score});
            }
            auto qunit = normalize(qvec);
            auto order = mmr_rerank(candidates, qunit, config_.mmr_lambda,
                                    static_cast<std::size_t>(config_.mmr_select), config_.scale_max);
            for (const auto& id : order) {
                const auto& a = score_cache_.at({question, id});
                if (a.score < config_.inclusion_threshold) continue;
                const Chunk* c = corpus_.find_chunk(id);
                const Document* d = corpus_.find_document(c->doc_id);
                ev.snippets.push_back({id, d->id, d->source_kind, a.summary, a.score, iter});
                admitted.insert(id);
            }
        }

        if (stop_reached(ev)) break;
        if (iter + 1 >= config_.max_iterations) break;

        // follow-up query from this round's summaries, best first
        std::sort(fresh.begin(), fresh.end(), [](const auto& a, const auto& b) {
            return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
        });
        std::vector<std::string> summaries;
        for (const auto& a : fresh) summaries.push_back(a.summary);
        if (summaries.empty())
            for (const auto& s : ev.snippets) summaries.push_back(s.summary);
        if (summaries.size() > 10) summaries.resize(10);
        if (summaries.empty()) continue;

        query = generate_followup_query(question, summaries, ev.queries_issued, iter + 2,
                                        roles_.scorer, roles_.scoring);
        ev.queries_issued.push_back(query);
    }
    spdlog::info("evidence loop '{}' finished: {} snippets, {} sources, {} iterations",
                 prefix_of(question), ev.snippets.size(), ev.source_ids().size(),
                 ev.iterations_used);
    return ev;
}

CitedAnswer Xplor::synthesize_answer(const std::string& question, const EvidenceSet& evidence) {
    return spark::synthesize_answer(question, evidence, roles_.scorer, roles_.scoring);
}

}  // namespace spark
