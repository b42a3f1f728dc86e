#include <gtest/gtest.h>

#include <random>

#include "oracles/rmse_oracle.hpp"
#include "spark/judge_data.hpp"
#include "spark/mock_backend.hpp"
#include "support.hpp"

using namespace spark;
using namespace spark::testkit;

namespace {

const ChatSettings kSettings{"annotator", 0.0, 512};

json submission(const std::string& id, const std::string& date, int n_reviews) {
    json reviews = json::array();
    for (int i = 1; i <= n_reviews; ++i)
        reviews.push_back({{"review_text", "Review " + std::to_string(i) + " of " + id},
                           {"rating", std::to_string(i + 4) + ": marginal"}});
    return {{"submission_id", id},
            {"abstract", "We propose method " + id + "."},
            {"date", date},
            {"venue", "ICLR"},
            {"reviews", reviews}};
}

std::filesystem::path write_dump(const TempDir& dir, const std::vector<std::string>& lines) {
    std::string body;
    for (const auto& l : lines) body += l + "\n";
    auto path = dir.path() / "dump.jsonl";
    write_file(path, body);
    return path;
}

AbstractReviewPair pair(const std::string& id, const std::string& date, bool with_idea) {
    AbstractReviewPair p;
    p.pair_id = id;
    p.submission_id = id;
    p.a_orig = "abstract " + id;
    p.r_orig = "review " + id;
    p.submission_date = parse_date(date);
    if (with_idea) {
        p.a_idea = "idea abstract " + id;
        p.r_idea = "idea review " + id;
    }
    return p;
}

// First reply for a prompt without the regeneration suffix, second reply once it is present.
MockBackend annotator(const std::string& first, const std::string& second) {
    return MockBackend({MockEntry{{}, {"previous rewrite"}, first},
                        MockEntry{{"previous rewrite"}, {}, second}});
}

}  // namespace

TEST(ExtractPairs, OneSubmissionThreeReviews) {
    TempDir dir;
    auto path = write_dump(dir, {submission("s1", "2024-05-01", 3).dump()});
    auto rep = extract_pairs(path);
    ASSERT_EQ(rep.pairs.size(), 3u);
    for (const auto& p : rep.pairs) {
        EXPECT_EQ(p.a_orig, rep.pairs[0].a_orig);
        EXPECT_EQ(p.submission_id, "s1");
        EXPECT_EQ(p.venue, "ICLR");
        ASSERT_TRUE(p.submission_date);
        EXPECT_EQ(format_date(*p.submission_date), "2024-05-01");
    }
    EXPECT_EQ(rep.pairs[0].pair_id, "s1#r1");
    EXPECT_EQ(rep.pairs[2].pair_id, "s1#r3");
    EXPECT_NE(rep.pairs[0].r_orig, rep.pairs[1].r_orig);
    EXPECT_DOUBLE_EQ(*rep.pairs[1].review_score, 6.0);
}

TEST(ExtractPairs, MissingAbstractSkipped) {
    TempDir dir;
    json bad = submission("s2", "2024-05-01", 1);
    bad.erase("abstract");
    auto rep = extract_pairs(write_dump(dir, {submission("s1", "2024-05-01", 1).dump(), bad.dump()}));
    EXPECT_EQ(rep.pairs.size(), 1u);
    EXPECT_EQ(rep.missing_abstract, 1u);
    EXPECT_EQ(rep.skipped(), 1u);
}

TEST(ExtractPairs, MalformedLinesSkipped) {
    TempDir dir;
    std::vector<std::string> lines;
    for (int i = 0; i < 8; ++i) {
        json rec = {{"submission_id", "s" + std::to_string(i)},
                    {"abstract", "abstract " + std::to_string(i)},
                    {"review_text", "review " + std::to_string(i)},
                    {"date", "2024-01-0" + std::to_string(i + 1)}};
        lines.push_back(rec.dump());
    }
    lines.insert(lines.begin() + 3, "{not json");
    lines.push_back("[1, 2]");
    auto rep = extract_pairs(write_dump(dir, lines));
    EXPECT_EQ(rep.records_read, 10u);
    EXPECT_EQ(rep.pairs.size(), 8u);
    EXPECT_EQ(rep.malformed_lines, 2u);
}

TEST(ExtractPairs, MissingFileIsIngestionError) {
    EXPECT_THROW(extract_pairs("/nonexistent/dump.jsonl"), IngestionError);
}

TEST(ExtractPairs, ScoreParsing) {
    EXPECT_DOUBLE_EQ(*parse_review_score(json("8: accept, good paper")), 8.0);
    EXPECT_DOUBLE_EQ(*parse_review_score(json(3.5)), 3.5);
    EXPECT_FALSE(parse_review_score(json("strong accept")));
}

TEST(LeakScreen, Rules) {
    EXPECT_TRUE(results_leak_violations("We study grounding of generated claims.").empty());
    EXPECT_FALSE(results_leak_violations("improves accuracy by 12%").empty());
    EXPECT_FALSE(results_leak_violations("see Table 3 results").empty());
    EXPECT_FALSE(results_leak_violations("achieves state-of-the-art accuracy").empty());
    EXPECT_FALSE(results_leak_violations("it outperforms prior work").empty());
}

TEST(Transform, CleanRewriteAccepted) {
    auto mock = annotator("A method that grounds claims in retrieved facts.", "unused");
    auto r = transform_to_idea_abstract("We improve accuracy by 12%.", mock, kSettings);
    EXPECT_FALSE(r.flagged);
    EXPECT_EQ(r.attempts, 1);
    EXPECT_EQ(*r.text, "A method that grounds claims in retrieved facts.");
    EXPECT_NE(mock.chat_log()[0].user_prompt.find("We improve accuracy by 12%."),
              std::string::npos);
}

TEST(Transform, PercentTriggersRegeneration) {
    auto mock = annotator("The method improves accuracy by 12%.", "The method grounds claims.");
    auto r = transform_to_idea_abstract("orig", mock, kSettings);
    EXPECT_FALSE(r.flagged);
    EXPECT_EQ(r.attempts, 2);
    EXPECT_EQ(*r.text, "The method grounds claims.");
    EXPECT_EQ(mock.chat_calls(), 2u);
}

TEST(Transform, TableReferenceTriggersRegeneration) {
    auto mock = annotator("Table 3 results are weak.", "The idea lacks motivation.");
    auto r = transform_to_idea_review("orig review", mock, kSettings);
    EXPECT_EQ(r.attempts, 2);
    EXPECT_EQ(*r.text, "The idea lacks motivation.");
}

TEST(Transform, TwoViolationsFlag) {
    auto mock = annotator("gains of 12%", "still 12% better");
    auto r = transform_to_idea_abstract("orig", mock, kSettings);
    EXPECT_TRUE(r.flagged);
    EXPECT_FALSE(r.text);
    EXPECT_EQ(r.attempts, 2);
    EXPECT_FALSE(r.violations.empty());
}

TEST(Transform, EmptyInputRejected) {
    auto mock = annotator("x", "y");
    EXPECT_THROW(transform_to_idea_abstract("   ", mock, kSettings), UsageError);
    EXPECT_EQ(mock.chat_calls(), 0u);
}

TEST(Transform, BatchWithOneFlaggedPair) {
    std::vector<AbstractReviewPair> pairs;
    for (int i = 0; i < 5; ++i) pairs.push_back(pair("p" + std::to_string(i), "2024-01-01", false));
    MockBackend mock({MockEntry{{"review p3"}, {}, "Figure 2 shows 30% gains"},
                      MockEntry{{"review"}, {}, "A critique of the idea."},
                      MockEntry{{}, {}, "An idea abstract."}});
    annotate_pairs(pairs, mock, kSettings);
    int with_review = 0;
    for (const auto& p : pairs) {
        if (p.r_idea) ++with_review;
        EXPECT_EQ(p.idea_flagged, p.pair_id == "p3");
    }
    EXPECT_EQ(with_review, 4);
    EXPECT_EQ(build_training_records(pairs).size(), 4u * 4 + 2u * 1);
}

TEST(TrainingRecords, FourNPlusTwoM) {
    std::vector<AbstractReviewPair> pairs;
    for (int i = 0; i < 7; ++i) pairs.push_back(pair("f" + std::to_string(i), "2024-01-01", true));
    for (int i = 0; i < 4; ++i) pairs.push_back(pair("o" + std::to_string(i), "2024-01-01", false));
    auto recs = build_training_records(pairs);
    EXPECT_EQ(recs.size(), 4u * 7 + 2u * 4);
}

TEST(TrainingRecords, Orientation) {
    auto p = pair("x", "2024-01-01", true);
    auto recs = build_training_records({p});
    ASSERT_EQ(recs.size(), 4u);
    for (const auto& r : recs) {
        EXPECT_EQ(r.system_prompt, system_prompt_for(r.task));
        switch (r.task) {
            case TaskKind::orig_review_pred:
                EXPECT_EQ(r.input, p.a_orig);
                EXPECT_EQ(r.target, p.r_orig);
                break;
            case TaskKind::orig_abstract_gen:
                EXPECT_EQ(r.input, p.r_orig);
                EXPECT_EQ(r.target, p.a_orig);
                break;
            case TaskKind::idea_review_pred:
                EXPECT_EQ(r.input, *p.a_idea);
                EXPECT_EQ(r.target, *p.r_idea);
                break;
            case TaskKind::idea_abstract_gen:
                EXPECT_EQ(r.input, *p.r_idea);
                EXPECT_EQ(r.target, *p.a_idea);
                break;
        }
    }
}

TEST(TrainingRecords, EvalAndGenAreMirrored) {
    auto recs = build_training_records({pair("x", "2024-01-01", true)});
    auto find = [&](TaskKind t) {
        return *std::find_if(recs.begin(), recs.end(), [&](auto& r) { return r.task == t; });
    };
    for (auto [eval, gen] : {std::pair{TaskKind::orig_review_pred, TaskKind::orig_abstract_gen},
                             std::pair{TaskKind::idea_review_pred, TaskKind::idea_abstract_gen}}) {
        auto e = find(eval), g = find(gen);
        EXPECT_EQ(e.input, g.target);
        EXPECT_EQ(e.target, g.input);
    }
}

TEST(TrainingRecords, JsonRoundTrip) {
    for (const auto& r : build_training_records({pair("x", "2024-02-03", true)})) {
        json j = r;
        EXPECT_EQ(j.get<TrainingRecord>(), r);
    }
    auto p = pair("y", "2024-02-03", true);
    p.review_score = 6;
    json j = p;
    EXPECT_EQ(j.get<AbstractReviewPair>(), p);
}

TEST(TemporalSplit, AfterCutoffGoesToTest) {
    auto recs = build_training_records({pair("late", "2025-01-15", true)});
    auto s = temporal_split(recs, *parse_date("2024-10-31"));
    EXPECT_TRUE(s.train.empty());
    EXPECT_EQ(s.test.size(), 4u);
}

TEST(TemporalSplit, OnCutoffGoesToTrain) {
    auto recs = build_training_records({pair("edge", "2024-10-31", false)});
    auto s = temporal_split(recs, *parse_date("2024-10-31"));
    EXPECT_EQ(s.train.size(), 2u);
    EXPECT_TRUE(s.test.empty());
}

TEST(TemporalSplit, MissingDateIsError) {
    auto p = pair("nodate", "2024-01-01", false);
    p.submission_date.reset();
    EXPECT_THROW(temporal_split(build_training_records({p}), *parse_date("2024-10-31")),
                 SplitError);
}

TEST(TemporalSplit, PairsNeverStraddle) {
    std::vector<AbstractReviewPair> pairs;
    for (int d = 1; d <= 28; ++d)
        pairs.push_back(pair("d" + std::to_string(d),
                             "2024-10-" + std::string(d < 10 ? "0" : "") + std::to_string(d),
                             d % 2 == 0));
    auto s = temporal_split(build_training_records(pairs), *parse_date("2024-10-14"));
    std::set<std::string> train_ids, test_ids;
    for (auto& r : s.train) train_ids.insert(r.pair_id);
    for (auto& r : s.test) test_ids.insert(r.pair_id);
    for (auto& id : train_ids) EXPECT_FALSE(test_ids.count(id)) << id;
    EXPECT_EQ(train_ids.size(), 14u);
    EXPECT_EQ(test_ids.size(), 14u);
}

TEST(ScoreRmse, KnownValues) {
    std::vector<double> p{2}, a{5};
    EXPECT_DOUBLE_EQ(score_rmse(p, a), 3.0);
    std::vector<double> same{1, 2, 3.5};
    EXPECT_DOUBLE_EQ(score_rmse(same, same), 0.0);
}

TEST(ScoreRmse, MatchesOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1.0, 10.0);
    for (int t = 0; t < 200; ++t) {
        std::size_t n = 1 + rng() % 50;
        std::vector<double> p(n), a(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = u(rng), a[i] = u(rng);
        EXPECT_NEAR(score_rmse(p, a), oracle::naive_rmse(p, a), 1e-12);
    }
}

TEST(ScoreRmse, LengthMismatch) {
    std::vector<double> p{1, 2}, a{1};
    EXPECT_THROW(score_rmse(p, a), UsageError);
    std::vector<double> none;
    EXPECT_THROW(score_rmse(none, none), UsageError);
}

TEST(LoadScores, NumbersAndObjects) {
    TempDir dir;
    auto path = dir.path() / "scores.jsonl";
    write_file(path, "5\n{\"score\": 6.5}\n{\"review_score\": 3}\n");
    EXPECT_EQ(load_scores(path), (std::vector<double>{5, 6.5, 3}));
    write_file(path, "{\"other\": 1}\n");
    EXPECT_ANY_THROW(load_scores(path));
}
