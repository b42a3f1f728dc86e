#include <gtest/gtest.h>

#include "spark/xplor.hpp"
#include "xplor_rig.hpp"

using namespace spark;
using namespace spark::testkit;

namespace {

Chunk sample_chunk() {
    Chunk c;
    c.id = "paper_1#0";
    c.doc_id = "paper_1";
    c.text = "Knowledge graphs ground chain-of-thought reasoning.";
    return c;
}

const ChatSettings kSettings{"chat", 0.0, 256};

class ThrowingSearch : public SearchClient {
public:
    std::vector<SearchResult> search(const std::string&) override {
        ++calls;
        throw SearchError("search service unavailable");
    }
    int calls = 0;
};

std::unique_ptr<SearchClient> fixture_search(const std::string& trigger,
                                             std::vector<SearchResult> results) {
    return std::make_unique<FixtureSearchClient>(
        std::vector<FixtureSearchClient::Entry>{{{trigger}, std::move(results)}});
}

}  // namespace

TEST(ScoreChunk, PassThrough) {
    auto mock = mock_script({{"Rate relevance", R"({"summary":"s","relevance":5})"}});
    auto a = score_chunk_relevance("q", sample_chunk(), mock, kSettings);
    EXPECT_EQ(a.score, 5);
    EXPECT_EQ(a.summary, "s");
    EXPECT_EQ(a.chunk_id, "paper_1#0");
}

TEST(ScoreChunk, ClampsOutOfRange) {
    auto mock = mock_script({{"Rate relevance", R"({"summary":"s","relevance":12})"}});
    EXPECT_EQ(score_chunk_relevance("q", sample_chunk(), mock, kSettings).score, 10);
    auto low = mock_script({{"Rate relevance", R"({"summary":"s","relevance":-3})"}});
    EXPECT_EQ(score_chunk_relevance("q", sample_chunk(), low, kSettings).score, 0);
}

TEST(ScoreChunk, RepairRetryCostsOneExtraCall) {
    MockBackend mock({entry({"Return only valid JSON"}, R"({"summary":"s","relevance":7})"),
                      entry({"Rate relevance"}, "I think it is quite relevant")});
    auto a = score_chunk_relevance("q", sample_chunk(), mock, kSettings);
    EXPECT_EQ(a.score, 7);
    EXPECT_EQ(mock.chat_calls(), 2u);
}

TEST(ScoreChunk, UnparseableAfterRepairThrows) {
    auto mock = mock_script({{"Rate relevance", "nope"}});
    EXPECT_THROW(score_chunk_relevance("q", sample_chunk(), mock, kSettings), ScoringParseError);
    EXPECT_EQ(mock.chat_calls(), 2u);
}

TEST(Followup, ReturnsModelQuery) {
    auto mock = mock_script({{"follow-up", "kg grounding for cot"}});
    EXPECT_EQ(generate_followup_query("q", {"s1"}, {"q"}, 2, mock, kSettings),
              "kg grounding for cot");
}

TEST(Followup, StripsQuotesAndNewlines) {
    auto mock = mock_script({{"follow-up", "\"kg grounding for cot\"\n"}});
    EXPECT_EQ(generate_followup_query("q", {"s1"}, {"q"}, 2, mock, kSettings),
              "kg grounding for cot");
}

TEST(Followup, RepeatedDuplicateGetsSuffix) {
    auto mock = mock_script({{"follow-up", "kg grounding"}});
    auto q = generate_followup_query("q", {"s1"}, {"q", "kg grounding"}, 2, mock, kSettings);
    EXPECT_EQ(q, "kg grounding (2)");
    EXPECT_EQ(mock.chat_calls(), 2u);
    EXPECT_NE(mock.chat_log()[1].user_prompt.find("different from"), std::string::npos);
}

TEST(Followup, EmptyReplyIsError) {
    auto mock = mock_script({{"follow-up", "  \n "}});
    EXPECT_THROW(generate_followup_query("q", {"s1"}, {"q"}, 2, mock, kSettings),
                 FollowupGenerationError);
}

TEST(Citations, KeepsKnownSource) {
    auto mock = mock_script({{"Answer using ONLY context", "X [paper_1]\nSources:\n[paper_1]"}});
    EvidenceSet ev;
    ev.snippets.push_back({"paper_1#0", "paper_1", SourceKind::paper, "s", 8, 0});
    auto a = synthesize_answer("q", ev, mock, kSettings);
    EXPECT_EQ(a.cited_source_ids, std::vector<std::string>{"paper_1"});
    EXPECT_EQ(a.text, "X [paper_1]\n\nSources:\n[paper_1]");
}

TEST(Citations, StripsGhostCitation) {
    auto a = validate_citations("Claim [ghost_9] and [paper_1].\nSources:\n[ghost_9]\n[paper_1]",
                                {"paper_1"});
    EXPECT_EQ(a.cited_source_ids, std::vector<std::string>{"paper_1"});
    EXPECT_EQ(a.text.find("ghost_9"), std::string::npos);
    EXPECT_EQ(a.text.substr(a.text.rfind("Sources:")), "Sources:\n[paper_1]");
}

TEST(Citations, TwoSourcesBothCited) {
    std::string text = "A [paper_1]; B [search_1].\n\nSources:\n[paper_1]\n[search_1]";
    auto a = validate_citations(text, {"paper_1", "search_1"});
    EXPECT_EQ(a.cited_source_ids.size(), 2u);
    for (const auto& id : a.cited_source_ids)
        EXPECT_NE(std::find(bracket_tokens(text).begin(), bracket_tokens(text).end(), id),
                  bracket_tokens(text).end());
}

TEST(Citations, EmptyAnswerIsSynthesisError) {
    auto mock = mock_script({{"Answer using ONLY context", "   "}});
    EvidenceSet ev;
    ev.snippets.push_back({"paper_1#0", "paper_1", SourceKind::paper, "s", 8, 0});
    EXPECT_THROW(synthesize_answer("q", ev, mock, kSettings), SynthesisError);
}

TEST(ExternalSearch, IngestsAndDeduplicates) {
    XplorRig rig({}, {},
                 fixture_search("graphs", {{"One", "fx://1", rig_body("one"), std::nullopt},
                                           {"Two", "fx://2", rig_body("two"), std::nullopt}}));
    auto docs = rig.xplor.external_search("knowledge graphs");
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].source_kind, SourceKind::search);
    EXPECT_EQ(rig.index.size(), 6u);
    EXPECT_TRUE(rig.xplor.external_search("knowledge graphs").empty());
    EXPECT_TRUE(rig.xplor.external_search("unrelated").empty());
}

TEST(ExternalSearch, FailingClientYieldsNothingAndLoopContinues) {
    auto throwing = std::make_unique<ThrowingSearch>();
    auto* raw = throwing.get();
    XplorConfig cfg;
    cfg.max_iterations = 2;
    XplorRig rig({score_all(9), followup("next query")}, cfg, std::move(throwing));
    rig.add_paper("alpha");
    EXPECT_TRUE(rig.xplor.external_search("anything").empty());
    auto ev = rig.xplor.evidence_loop("question");
    EXPECT_EQ(ev.iterations_used, 2);
    EXPECT_EQ(ev.snippets.size(), 3u);
    EXPECT_GE(raw->calls, 3);
}

TEST(EvidenceLoop, StopsInOneIterationWithFiveSnippetsTwoSources) {
    XplorRig rig({score_all(10)});
    rig.add_paper("alpha");
    rig.add_paper("beta");
    auto ev = rig.xplor.evidence_loop("what grounds reasoning?");
    EXPECT_EQ(ev.iterations_used, 1);
    EXPECT_GE(ev.snippets.size(), 5u);
    EXPECT_EQ(ev.source_ids().size(), 2u);
    EXPECT_EQ(ev.queries_issued, std::vector<std::string>{"what grounds reasoning?"});
}

TEST(EvidenceLoop, ZeroScoresRunToMaxIterations) {
    XplorRig rig({score_all(0), followup("another angle")});
    rig.add_paper("alpha");
    rig.add_paper("beta");
    auto ev = rig.xplor.evidence_loop("q");
    EXPECT_EQ(ev.iterations_used, XplorConfig{}.max_iterations);
    EXPECT_TRUE(ev.empty());
}

TEST(EvidenceLoop, SearchAddsSecondSourceOnIterationTwo) {
    XplorRig rig({score_all(10), followup("broader survey of grounding")},
                 {}, fixture_search("survey", {{"Beta", "fx://beta", rig_body("beta"), std::nullopt}}));
    std::string a = rig.add_paper("alpha");
    auto ev = rig.xplor.evidence_loop("what grounds reasoning?");
    EXPECT_EQ(ev.iterations_used, 2);
    auto sources = ev.source_ids();
    ASSERT_EQ(sources.size(), 2u);
    EXPECT_EQ(sources[0], a);
    EXPECT_EQ(rig.corpus.find_document(sources[1])->source_kind, SourceKind::search);
    EXPECT_EQ(ev.queries_issued.back(), "broader survey of grounding");
    for (const auto& s : ev.snippets) EXPECT_EQ(s.iteration, s.source_id == a ? 0 : 1);
}

TEST(EvidenceLoop, CachedScoresAreNotRequested) {
    XplorRig rig({score_all(10)});
    rig.add_paper("alpha");
    rig.add_paper("beta");
    rig.xplor.evidence_loop("same question");
    auto calls = rig.backend.chat_calls();
    rig.xplor.evidence_loop("same question");
    EXPECT_EQ(rig.backend.chat_calls(), calls);
}

TEST(EvidenceLoop, RequiresIndexOrSearch) {
    XplorRig rig({score_all(10)});
    EXPECT_THROW(rig.xplor.evidence_loop("q"), UsageError);
}

TEST(EvidenceLoop, ScorerErrorsPropagate) {
    XplorRig rig({});
    rig.add_paper("alpha");
    EXPECT_THROW(rig.xplor.evidence_loop("q"), ScriptedMissError);
}

TEST(EvidenceSetJson, RoundTrip) {
    XplorRig rig({score_all(10)});
    rig.add_paper("alpha");
    rig.add_paper("beta");
    auto ev = rig.xplor.evidence_loop("q");
    json j = ev;
    EXPECT_EQ(j.get<EvidenceSet>(), ev);
}
