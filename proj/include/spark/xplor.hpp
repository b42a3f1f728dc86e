#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spark/backend.hpp"
#include "spark/clock.hpp"
#include "spark/corpus.hpp"
#include "spark/error.hpp"
#include "spark/search.hpp"
#include "spark/vector_index.hpp"

namespace spark {

class ScoringParseError : public ParseError {
public:
    using ParseError::ParseError;
};
class FollowupGenerationError : public ParseError {
public:
    using ParseError::ParseError;
};
class SynthesisError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Model id and sampling settings shared by the prompts of one role.
struct ChatSettings {
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct RelevanceAssessment {
    std::string chunk_id;
    std::string summary;
    int score = 0;
    int scale_max = 10;
};

struct EvidenceSnippet {
    std::string chunk_id;
    std::string source_id;
    SourceKind source_kind = SourceKind::paper;
    std::string summary;
    int score = 0;
    int iteration = 0;

    bool operator==(const EvidenceSnippet&) const = default;
};

struct EvidenceSet {
    std::string id;
    std::string question;
    std::vector<EvidenceSnippet> snippets;
    std::vector<std::string> queries_issued;
    int iterations_used = 0;
    int scale_max = 10;

    bool empty() const { return snippets.empty(); }
    /// Distinct source ids in first-appearance order.
    std::vector<std::string> source_ids() const;

    bool operator==(const EvidenceSet&) const = default;
};

struct XplorConfig {
    int min_evidence = 5;
    int min_distinct_sources = 2;
    int max_iterations = 5;
    int candidates_per_query = 20;
    double mmr_lambda = 0.5;
    int mmr_select = 8;
    int inclusion_threshold = 6;
    int scale_max = 10;

    void validate() const;
};

struct CitedAnswer {
    std::string text;
    std::vector<std::string> cited_source_ids;
};

void to_json(json& j, const RelevanceAssessment& a);
void to_json(json& j, const EvidenceSnippet& s);
void from_json(const json& j, EvidenceSnippet& s);
void to_json(json& j, const EvidenceSet& e);
void from_json(const json& j, EvidenceSet& e);
void to_json(json& j, const XplorConfig& c);
void from_json(const json& j, XplorConfig& c);
void to_json(json& j, const CitedAnswer& a);

/// Asks the model for a summary and a 0..scale_max relevance score. One repair
/// retry on unparseable output; scores outside the scale are clamped.
RelevanceAssessment score_chunk_relevance(const std::string& question, const Chunk& chunk,
                                          Backend& backend, const ChatSettings& settings,
                                          int scale_max = 10);

/// Single-line follow-up query that differs from every issued query. On a
/// repeat the model is asked once more; a second repeat gets an " (n)" suffix
/// with n = `iteration`.
std::string generate_followup_query(const std::string& question,
                                    const std::vector<std::string>& summaries,
                                    const std::vector<std::string>& issued, int iteration,
                                    Backend& backend, const ChatSettings& settings);

/// Strips citations absent from `known_sources` and rebuilds the trailing
/// "Sources:" block from the citations that remain.
CitedAnswer validate_citations(const std::string& answer,
                               const std::vector<std::string>& known_sources);

CitedAnswer synthesize_answer(const std::string& question, const EvidenceSet& evidence,
                              Backend& backend, const ChatSettings& settings);

/// Renders the "[Source: id] summary (R: s/max)" context block.
std::string render_evidence_context(const EvidenceSet& evidence);

/// The recursive retrieval agent. Borrows the corpus and index; a single
/// instance runs one loop at a time.
class Xplor {
public:
    struct Roles {
        Backend& embedder;
        Backend& scorer;
        std::string embedding_model;
        ChatSettings scoring;
    };

    Xplor(XplorConfig config, ChunkingConfig chunking, Corpus& corpus, FlatIndex& index,
          Roles roles, SearchClient* search, Clock& clock);

    const XplorConfig& config() const { return config_; }

    /// Chunks, embeds and indexes one document already in the corpus.
    void index_document(const std::string& doc_id);

    /// Runs the search client and ingests unseen results as `search`
    /// documents. Client failures are logged and yield no documents.
    std::vector<Document> external_search(const std::string& query);

    EvidenceSet evidence_loop(const std::string& question);

    CitedAnswer synthesize_answer(const std::string& question, const EvidenceSet& evidence);

private:
    std::vector<RelevanceAssessment> score_batch(const std::string& question,
                                                 const std::vector<const Chunk*>& chunks);
    bool stop_reached(const EvidenceSet& ev) const;

    XplorConfig config_;
    ChunkingConfig chunking_;
    Corpus& corpus_;
    FlatIndex& index_;
    Roles roles_;
    SearchClient* search_;
    Clock& clock_;
    std::map<std::pair<std::string, std::string>, RelevanceAssessment> score_cache_;
    int loops_run_ = 0;
};

}  // namespace spark
